#pragma once

// Synthetic corpus generator for desk-scale runs.
//
// Every movie draws a latent quality q that fixes its gross. A second latent
// q_feat = signal * q + (1 - signal) * q' (q' independent) drives everything
// observable: which actors are cast (by star power), the share of positive
// posts, and indirectly the graph position and account statistics of the
// cast. At signal 1 the observable features are a deterministic function of
// the label-determining quality; at signal 0 they are independent of it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/rng.hpp"

namespace boxoffice::corpus {

struct SynthConfig {
  std::size_t n_movies = 200;
  std::size_t n_actors = 120;
  std::size_t n_accounts = 84;
  double edge_density = 0.08;
  std::size_t posts_per_movie = 30;
  double signal = 1.0;
  std::size_t cast_min = 3;
  std::size_t cast_max = 8;
  std::size_t n_sentiment_train = 400;

  void validate() const {
    if (n_movies < 2) throw UsageError("synth: n_movies must be at least 2");
    if (n_actors < 1) throw UsageError("synth: n_actors must be at least 1");
    if (n_accounts > n_actors) throw UsageError("synth: n_accounts must not exceed n_actors");
    if (!(edge_density >= 0.0 && edge_density <= 1.0)) throw UsageError("synth: edge_density must be in [0,1]");
    if (!(signal >= 0.0 && signal <= 1.0)) throw UsageError("synth: signal must be in [0,1]");
    if (cast_min < 1 || cast_min > cast_max) throw UsageError("synth: need 1 <= cast_min <= cast_max");
    if (cast_max > n_actors) throw UsageError("synth: cast_max must not exceed n_actors");
    if (n_actors > 30 * 40 * 40) throw UsageError("synth: n_actors exceeds the name space");
  }

  static SynthConfig from_key_values(const std::map<std::string, std::string>& kv) {
    SynthConfig c;
    auto get_size = [](const std::string& k, const std::string& v, std::size_t& out) {
      if (!io::parse_number(v, out)) throw UsageError("synth config: invalid value for " + k + ": '" + v + "'");
    };
    auto get_real = [](const std::string& k, const std::string& v, double& out) {
      if (!io::parse_number(v, out)) throw UsageError("synth config: invalid value for " + k + ": '" + v + "'");
    };
    for (const auto& [k, v] : kv) {
      if (k == "n_movies") get_size(k, v, c.n_movies);
      else if (k == "n_actors") get_size(k, v, c.n_actors);
      else if (k == "n_accounts") get_size(k, v, c.n_accounts);
      else if (k == "edge_density") get_real(k, v, c.edge_density);
      else if (k == "posts_per_movie") get_size(k, v, c.posts_per_movie);
      else if (k == "signal") get_real(k, v, c.signal);
      else if (k == "cast_min") get_size(k, v, c.cast_min);
      else if (k == "cast_max") get_size(k, v, c.cast_max);
      else if (k == "n_sentiment_train") get_size(k, v, c.n_sentiment_train);
      else throw UsageError("synth config: unknown key '" + k + "'");
    }
    c.validate();
    return c;
  }
};

struct SyntheticData {
  Corpus corpus;
  std::vector<LabeledText> sentiment_train;
};

namespace detail {

inline const std::vector<std::string> kSurnames = {
    "王", "李", "张", "刘", "陈", "杨", "黄", "赵", "吴", "周", "徐", "孙", "马", "朱", "胡",
    "郭", "何", "高", "林", "罗", "郑", "梁", "谢", "宋", "唐", "许", "韩", "冯", "邓", "曹"};
inline const std::vector<std::string> kGiven = {
    "伟", "芳", "娜", "敏", "静", "丽", "强", "磊", "军", "洋", "勇", "艳", "杰", "娟",
    "涛", "明", "超", "秀", "霞", "平", "刚", "桂", "英", "华", "玉", "萍", "红", "鹏",
    "宇", "晨", "欣", "琳", "昊", "然", "嘉", "博", "雪", "婷", "峰", "凯"};

inline const std::vector<std::string> kPositive = {"精彩绝伦", "好看", "感人至深", "强烈推荐",
                                                   "演技炸裂", "值得一看", "超级喜欢", "震撼人心"};
inline const std::vector<std::string> kNegative = {"无聊透顶", "难看死了", "太失望", "浪费时间",
                                                   "烂片一部", "剧情拖沓", "尴尬癌", "后悔买票"};
inline const std::vector<std::string> kFiller = {"今天去看了", "和朋友一起看", "刚刚看完", "听说",
                                                 "周末去电影院看", "终于看了"};

/// Fixed-length three-character names, so no name is a substring of another.
inline std::vector<std::string> actor_names(std::size_t n, Rng& rng) {
  const std::size_t space = kSurnames.size() * kGiven.size() * kGiven.size();
  std::vector<std::size_t> codes(space);
  for (std::size_t i = 0; i < space; ++i) codes[i] = i;
  rng.shuffle(std::span(codes));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = codes[i];
    const auto g2 = c % kGiven.size();
    const auto g1 = (c / kGiven.size()) % kGiven.size();
    const auto s = c / (kGiven.size() * kGiven.size());
    out.push_back(kSurnames[s] + kGiven[g1] + kGiven[g2]);
  }
  return out;
}

inline std::string movie_name(std::size_t id) {
  std::string digits = std::to_string(id);
  while (digits.size() < 4) digits.insert(digits.begin(), '0');
  return "《星河" + digits + "》";
}

inline std::string pick(const std::vector<std::string>& v, Rng& rng) { return v[rng.below(v.size())]; }

inline std::string post_text(const std::string& subject, bool positive, Rng& rng) {
  return pick(kFiller, rng) + subject + "，" + pick(positive ? kPositive : kNegative, rng) + "！";
}

}  // namespace detail

/// Builds an aligned in-memory corpus (art features filled) plus a labeled
/// sentiment training set. Deterministic for a fixed seed.
inline SyntheticData generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const double s = config.signal;
  SyntheticData out;
  Corpus& c = out.corpus;

  const auto names = detail::actor_names(config.n_actors, rng);
  std::vector<double> star(config.n_actors);
  for (auto& u : star) u = rng.uniform();

  // Actors ordered by star power; casting picks from a window of this list.
  std::vector<std::size_t> by_star(config.n_actors);
  for (std::size_t i = 0; i < by_star.size(); ++i) by_star[i] = i;
  std::stable_sort(by_star.begin(), by_star.end(), [&](auto a, auto b) { return star[a] < star[b]; });

  std::vector<std::size_t> with_account(config.n_actors);
  for (std::size_t i = 0; i < with_account.size(); ++i) with_account[i] = i;
  rng.shuffle(std::span(with_account));
  with_account.resize(config.n_accounts);
  std::sort(with_account.begin(), with_account.end());

  for (std::size_t k = 0; k < with_account.size(); ++k) {
    const auto a = with_account[k];
    const double u = star[a];
    const double jitter = rng.uniform(0.95, 1.05);
    AccountStats acc;
    acc.account_id = "u" + std::to_string(10000 + k);
    acc.actor_name = names[a];
    acc.fans = static_cast<std::uint64_t>(std::llround(500.0 * std::exp(6.0 * u) * jitter));
    acc.followers = static_cast<std::uint64_t>(std::llround((50.0 + 400.0 * u) * jitter));
    acc.post_count = static_cast<std::uint64_t>(std::llround((200.0 + 2000.0 * u) * jitter));
    acc.avg_post_interval_hours = std::round((48.0 - 40.0 * u) * jitter * 100.0) / 100.0;
    acc.avg_post_chars = std::round((40.0 + 60.0 * u) * jitter * 100.0) / 100.0;
    acc.retweet_count = static_cast<std::uint64_t>(std::llround((100.0 + 3000.0 * u) * jitter));
    acc.movie_mention_count = static_cast<std::uint64_t>(std::llround((5.0 + 50.0 * u) * jitter));
    c.accounts.push_back(std::move(acc));
  }

  for (std::size_t i = 0; i < with_account.size(); ++i) {
    for (std::size_t j = i + 1; j < with_account.size(); ++j) {
      const double ui = star[with_account[i]];
      const double uj = star[with_account[j]];
      const double p = std::min(1.0, config.edge_density * ((1.0 - s) + s * (ui + uj)));
      if (rng.bernoulli(p)) c.edges.push_back({c.accounts[i].account_id, c.accounts[j].account_id});
    }
  }

  std::vector<double> feature_quality(config.n_movies);
  for (std::size_t m = 0; m < config.n_movies; ++m) {
    const double q = rng.uniform();
    const double q_other = rng.uniform();
    const double qf = s * q + (1.0 - s) * q_other;
    feature_quality[m] = qf;

    Movie movie;
    movie.id = static_cast<MovieId>(m + 1);
    movie.name = detail::movie_name(m + 1);
    movie.release_year = 2011 + static_cast<int>(rng.below(5));
    movie.box_office = std::round(5.0 * std::exp(7.0 * q) * 10.0) / 10.0;

    const auto k = config.cast_min + rng.below(config.cast_max - config.cast_min + 1);
    const auto n = static_cast<std::ptrdiff_t>(config.n_actors);
    const auto half = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k), n / 10);
    const auto center = static_cast<std::ptrdiff_t>(std::llround(qf * static_cast<double>(n - 1)));
    auto lo = std::max<std::ptrdiff_t>(0, center - half);
    auto hi = std::min<std::ptrdiff_t>(n - 1, center + half);
    std::vector<std::size_t> window;
    for (auto r = lo; r <= hi; ++r) window.push_back(by_star[static_cast<std::size_t>(r)]);
    rng.shuffle(std::span(window));
    // Stars first: billing order follows star power within the cast.
    window.resize(std::min(window.size(), k));
    std::stable_sort(window.begin(), window.end(), [&](auto a, auto b) { return star[a] > star[b]; });
    for (auto a : window) movie.cast.push_back(names[a]);
    c.movies.push_back(std::move(movie));
  }

  for (std::size_t m = 0; m < config.n_movies; ++m) {
    const auto& movie = c.movies[m];
    const auto n_posts = config.posts_per_movie;
    const auto n_pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_posts) * (0.1 + 0.8 * feature_quality[m])));
    for (std::size_t p = 0; p < n_posts; ++p) {
      Post post;
      std::string subject = movie.name;
      const auto mentions = rng.below(3);
      for (std::size_t t = 0; t < mentions && t < movie.cast.size(); ++t) {
        subject += movie.cast[rng.below(movie.cast.size())];
      }
      post.text = detail::post_text(subject, p < n_pos, rng);
      post.is_retweet = rng.bernoulli(0.3);
      if (!rng.bernoulli(0.2)) post.movie_id = movie.id;
      if (!c.accounts.empty() && rng.bernoulli(0.5)) {
        post.author_account = c.accounts[rng.below(c.accounts.size())].account_id;
      }
      c.posts.push_back(std::move(post));
    }
  }

  for (std::size_t t = 0; t < config.n_sentiment_train; ++t) {
    const bool positive = t % 2 == 0;
    std::string subject = detail::movie_name(1 + rng.below(9999));
    if (!names.empty() && rng.bernoulli(0.5)) subject += names[rng.below(names.size())];
    out.sentiment_train.push_back({detail::post_text(subject, positive, rng), positive});
  }

  c = align_entities(std::move(c));
  apply_art_features(c, compute_art_features(c));
  return out;
}

inline void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  write_corpus(data.corpus, dir);
  write_sentiment_training(data.sentiment_train, (dir / "sentiment_train.csv").string());
}

}  // namespace boxoffice::corpus
