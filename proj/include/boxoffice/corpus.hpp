#pragma once

// Movie corpus data model: file ingestion, actor dictionary and entity
// alignment, art features, A/B labeling and train/test splitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/rng.hpp"

namespace boxoffice::corpus {

using MovieId = std::int64_t;

/// Box office is in units of 10,000 CNY throughout.
struct Movie {
  MovieId id = 0;
  std::string name;
  int release_year = 0;
  double box_office = 0.0;
  std::vector<std::string> cast;  // billing order, de-duplicated

  bool operator==(const Movie&) const = default;
};

/// Raw per-account statistics as collected from the social network.
struct AccountStats {
  std::string account_id;
  std::string actor_name;
  std::uint64_t fans = 0;
  std::uint64_t followers = 0;
  std::uint64_t post_count = 0;
  double avg_post_interval_hours = 0.0;
  double avg_post_chars = 0.0;
  std::uint64_t retweet_count = 0;
  std::uint64_t movie_mention_count = 0;

  bool operator==(const AccountStats&) const = default;
};

struct Edge {
  std::string src;
  std::string dst;

  bool operator==(const Edge&) const = default;
};

struct Post {
  std::string text;
  bool is_retweet = false;
  std::optional<MovieId> movie_id;
  std::optional<std::string> author_account;

  bool operator==(const Post&) const = default;
};

/// One dictionary entry. Actors without a matching account are "unknown
/// nodes": they have no measurements and no graph row.
struct ActorRecord {
  std::string name;
  std::optional<std::string> account_id;
  double art_feature = 0.0;

  bool has_social() const { return account_id.has_value(); }
  bool operator==(const ActorRecord&) const = default;
};

enum class ClassLabel : std::uint8_t { A = 0, B = 1 };

inline char to_char(ClassLabel l) { return l == ClassLabel::A ? 'A' : 'B'; }

struct DatasetSplit {
  std::vector<MovieId> train;
  std::vector<MovieId> test;
  std::uint64_t seed = 0;

  bool operator==(const DatasetSplit&) const = default;
};

struct Corpus {
  std::vector<Movie> movies;
  std::vector<AccountStats> accounts;
  std::vector<Edge> edges;
  std::vector<Post> posts;
  std::vector<ActorRecord> actors;              // dictionary, first-appearance order
  std::map<std::string, std::size_t> actor_index;  // name -> position in `actors`

  const ActorRecord& actor(const std::string& name) const {
    auto it = actor_index.find(io::trim(name));
    if (it == actor_index.end()) throw DataError("actor not in dictionary: " + name);
    return actors[it->second];
  }

  const Movie* find_movie(MovieId id) const {
    for (const auto& m : movies) {
      if (m.id == id) return &m;
    }
    return nullptr;
  }
};

struct CorpusPaths {
  std::string movies;
  std::string accounts;
  std::string edges;
  std::string posts;

  /// The canonical file names inside a corpus directory.
  static CorpusPaths in_directory(const std::filesystem::path& dir) {
    return {(dir / "movies.csv").string(), (dir / "accounts.csv").string(),
            (dir / "edges.csv").string(), (dir / "posts.jsonl").string()};
  }
};

inline const std::vector<std::string> kMoviesHeader = {"id", "name", "year", "box_office_10k", "cast"};
inline const std::vector<std::string> kAccountsHeader = {
    "account_id",    "actor_name",    "fans",
    "followers",     "post_count",    "avg_post_interval_hours",
    "avg_post_chars", "retweet_count", "movie_mention_count"};
inline const std::vector<std::string> kEdgesHeader = {"src_account", "dst_account"};

namespace detail {

template <typename T>
T field_number(const io::CsvRow& row, std::size_t k, const std::string& file, const char* what) {
  T v{};
  if (!io::parse_number(row.fields[k], v)) {
    throw ParseError(file, row.line, std::string("invalid ") + what + " '" + row.fields[k] + "'");
  }
  return v;
}

inline double field_non_negative(const io::CsvRow& row, std::size_t k, const std::string& file,
                                  const char* what) {
  const auto v = field_number<double>(row, k, file, what);
  if (!std::isfinite(v) || v < 0.0) {
    throw ParseError(file, row.line, std::string(what) + " must be finite and non-negative");
  }
  return v;
}

}  // namespace detail

inline std::vector<Movie> read_movies(const std::string& path) {
  std::vector<Movie> movies;
  std::set<MovieId> seen;
  for (const auto& row : io::read_csv_with_header(path, kMoviesHeader)) {
    Movie m;
    m.id = detail::field_number<MovieId>(row, 0, path, "id");
    m.name = io::trim(row.fields[1]);
    m.release_year = detail::field_number<int>(row, 2, path, "year");
    m.box_office = detail::field_non_negative(row, 3, path, "box_office_10k");
    std::set<std::string> in_cast;
    for (const auto& raw : io::split(row.fields[4], ';')) {
      auto name = io::trim(raw);
      if (name.empty()) continue;
      if (in_cast.insert(name).second) m.cast.push_back(name);
    }
    if (m.cast.empty()) throw ParseError(path, row.line, "movie has an empty cast");
    if (!seen.insert(m.id).second) {
      throw ParseError(path, row.line, "duplicate movie id " + std::to_string(m.id));
    }
    movies.push_back(std::move(m));
  }
  return movies;
}

inline std::vector<AccountStats> read_accounts(const std::string& path) {
  std::vector<AccountStats> out;
  std::set<std::string> seen;
  for (const auto& row : io::read_csv_with_header(path, kAccountsHeader)) {
    AccountStats a;
    a.account_id = io::trim(row.fields[0]);
    a.actor_name = io::trim(row.fields[1]);
    if (a.account_id.empty()) throw ParseError(path, row.line, "empty account_id");
    if (a.actor_name.empty()) throw ParseError(path, row.line, "empty actor_name");
    a.fans = detail::field_number<std::uint64_t>(row, 2, path, "fans");
    a.followers = detail::field_number<std::uint64_t>(row, 3, path, "followers");
    a.post_count = detail::field_number<std::uint64_t>(row, 4, path, "post_count");
    a.avg_post_interval_hours = detail::field_non_negative(row, 5, path, "avg_post_interval_hours");
    a.avg_post_chars = detail::field_non_negative(row, 6, path, "avg_post_chars");
    a.retweet_count = detail::field_number<std::uint64_t>(row, 7, path, "retweet_count");
    a.movie_mention_count = detail::field_number<std::uint64_t>(row, 8, path, "movie_mention_count");
    if (!seen.insert(a.account_id).second) {
      throw ParseError(path, row.line, "duplicate account_id '" + a.account_id + "'");
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<Edge> read_edges(const std::string& path, const std::vector<AccountStats>& accounts) {
  std::set<std::string> known;
  for (const auto& a : accounts) known.insert(a.account_id);
  std::vector<Edge> out;
  for (const auto& row : io::read_csv_with_header(path, kEdgesHeader)) {
    Edge e{io::trim(row.fields[0]), io::trim(row.fields[1])};
    for (const auto* id : {&e.src, &e.dst}) {
      if (!known.contains(*id)) throw ParseError(path, row.line, "edge references unknown account '" + *id + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<Post> read_posts(const std::string& path) {
  std::vector<Post> out;
  std::size_t line_no = 0;
  for (const auto& line : io::split(io::read_file(path), '\n')) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(path, line_no, "expected a JSON object");
    Post p;
    if (!j.contains("text") || !j["text"].is_string()) throw ParseError(path, line_no, "missing string key 'text'");
    p.text = j["text"].get<std::string>();
    if (io::trim(p.text).empty()) throw ParseError(path, line_no, "post text is empty");
    if (j.contains("is_retweet")) {
      if (!j["is_retweet"].is_boolean()) throw ParseError(path, line_no, "'is_retweet' must be a bool");
      p.is_retweet = j["is_retweet"].get<bool>();
    }
    if (j.contains("movie_id") && !j["movie_id"].is_null()) {
      if (!j["movie_id"].is_number_integer()) throw ParseError(path, line_no, "'movie_id' must be an integer or null");
      p.movie_id = j["movie_id"].get<MovieId>();
    }
    if (j.contains("author_account") && !j["author_account"].is_null()) {
      if (!j["author_account"].is_string()) throw ParseError(path, line_no, "'author_account' must be a string or null");
      p.author_account = j["author_account"].get<std::string>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Rebuilds the actor dictionary from the cast lists and matches each name
/// to at most one account by exact comparison of whitespace-trimmed names.
/// Art features are reset to zero; see compute_art_features.
inline Corpus align_entities(Corpus corpus) {
  std::map<std::string, std::string> account_for_name;
  for (const auto& a : corpus.accounts) {
    auto name = io::trim(a.actor_name);
    auto [it, inserted] = account_for_name.emplace(name, a.account_id);
    if (!inserted) {
      throw DataError("actor name '" + name + "' is claimed by accounts '" + it->second + "' and '" +
                      a.account_id + "'");
    }
  }
  corpus.actors.clear();
  corpus.actor_index.clear();
  for (const auto& m : corpus.movies) {
    for (const auto& raw : m.cast) {
      auto name = io::trim(raw);
      if (corpus.actor_index.contains(name)) continue;
      ActorRecord rec;
      rec.name = name;
      if (auto it = account_for_name.find(name); it != account_for_name.end()) rec.account_id = it->second;
      corpus.actor_index.emplace(name, corpus.actors.size());
      corpus.actors.push_back(std::move(rec));
    }
  }
  return corpus;
}

/// Mean box office over the movies each dictionary actor appears in;
/// actors in no counted movie map to 0. When `movie_ids` is given only
/// those movies are counted (used to keep held-out grosses out of the
/// features).
inline std::map<std::string, double> compute_art_features(
    const Corpus& corpus, const std::unordered_set<MovieId>* movie_ids = nullptr) {
  std::map<std::string, double> sum;
  std::map<std::string, std::size_t> count;
  for (const auto& a : corpus.actors) {
    sum[a.name] = 0.0;
    count[a.name] = 0;
  }
  for (const auto& m : corpus.movies) {
    if (movie_ids && !movie_ids->contains(m.id)) continue;
    for (const auto& raw : m.cast) {
      auto name = io::trim(raw);
      sum[name] += m.box_office;
      count[name] += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [name, s] : sum) {
    out[name] = count[name] == 0 ? 0.0 : s / static_cast<double>(count[name]);
  }
  return out;
}

/// Stores compute_art_features results on the dictionary records.
inline void apply_art_features(Corpus& corpus, const std::map<std::string, double>& art) {
  for (auto& a : corpus.actors) {
    auto it = art.find(a.name);
    a.art_feature = it == art.end() ? 0.0 : it->second;
  }
}

/// Reads and validates the four corpus files, aligns entities and fills
/// art features over all movies.
inline Corpus ingest_corpus(const CorpusPaths& paths) {
  Corpus c;
  c.movies = read_movies(paths.movies);
  c.accounts = read_accounts(paths.accounts);
  c.edges = read_edges(paths.edges, c.accounts);
  c.posts = read_posts(paths.posts);
  c = align_entities(std::move(c));
  apply_art_features(c, compute_art_features(c));
  return c;
}

inline Corpus ingest_directory(const std::filesystem::path& dir) {
  return ingest_corpus(CorpusPaths::in_directory(dir));
}

/// Writes the four corpus files in the canonical formats. Numbers use the
/// shortest round-trip representation so re-ingestion is exact.
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = CorpusPaths::in_directory(dir);

  std::string movies = io::csv_line(kMoviesHeader);
  for (const auto& m : c.movies) {
    std::string cast;
    for (const auto& name : m.cast) cast += (cast.empty() ? "" : ";") + name;
    movies += io::csv_line({std::to_string(m.id), m.name, std::to_string(m.release_year),
                            io::format_double(m.box_office), cast});
  }
  io::write_file(paths.movies, movies);

  std::string accounts = io::csv_line(kAccountsHeader);
  for (const auto& a : c.accounts) {
    accounts += io::csv_line({a.account_id, a.actor_name, std::to_string(a.fans), std::to_string(a.followers),
                              std::to_string(a.post_count), io::format_double(a.avg_post_interval_hours),
                              io::format_double(a.avg_post_chars), std::to_string(a.retweet_count),
                              std::to_string(a.movie_mention_count)});
  }
  io::write_file(paths.accounts, accounts);

  std::string edges = io::csv_line(kEdgesHeader);
  for (const auto& e : c.edges) edges += io::csv_line({e.src, e.dst});
  io::write_file(paths.edges, edges);

  std::string posts;
  for (const auto& p : c.posts) {
    nlohmann::ordered_json j;
    j["text"] = p.text;
    j["is_retweet"] = p.is_retweet;
    j["movie_id"] = p.movie_id ? nlohmann::ordered_json(*p.movie_id) : nlohmann::ordered_json(nullptr);
    j["author_account"] =
        p.author_account ? nlohmann::ordered_json(*p.author_account) : nlohmann::ordered_json(nullptr);
    posts += j.dump() + "\n";
  }
  io::write_file(paths.posts, posts);
}

// ---------------------------------------------------------------- sentiment training data

/// One row of sentiment_train.csv.
struct LabeledText {
  std::string text;
  bool positive = false;

  bool operator==(const LabeledText&) const = default;
};

inline std::vector<LabeledText> read_sentiment_training(const std::string& path) {
  std::vector<LabeledText> out;
  for (const auto& row : io::read_csv_with_header(path, {"text", "label"})) {
    const auto label = io::trim(row.fields[1]);
    if (label != "pos" && label != "neg") {
      throw ParseError(path, row.line, "label must be 'pos' or 'neg', got '" + label + "'");
    }
    if (io::trim(row.fields[0]).empty()) throw ParseError(path, row.line, "empty text");
    out.push_back({row.fields[0], label == "pos"});
  }
  return out;
}

inline void write_sentiment_training(const std::vector<LabeledText>& rows, const std::string& path) {
  std::string out = io::csv_line({"text", "label"});
  for (const auto& r : rows) out += io::csv_line({r.text, r.positive ? "pos" : "neg"});
  io::write_file(path, out);
}

// ---------------------------------------------------------------- labels & splits

inline constexpr double kReferenceMedianThreshold = 263.5;

/// A iff box_office < threshold; equality goes to B.
inline ClassLabel label_for(double box_office, double threshold) {
  return box_office < threshold ? ClassLabel::A : ClassLabel::B;
}

inline std::map<MovieId, ClassLabel> label_movies(const Corpus& corpus, double threshold = kReferenceMedianThreshold) {
  if (!(threshold > 0.0)) throw UsageError("label threshold must be positive");
  std::map<MovieId, ClassLabel> out;
  for (const auto& m : corpus.movies) out[m.id] = label_for(m.box_office, threshold);
  return out;
}

/// Median of the corpus grosses (mean of the two middle values for even
/// counts).
inline double median_box_office(const Corpus& corpus) {
  if (corpus.movies.empty()) throw DataError("median of an empty corpus");
  std::vector<double> v;
  for (const auto& m : corpus.movies) v.push_back(m.box_office);
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Seeded random partition with |train| = floor(ratio * N), clamped so both
/// parts are non-empty. Each part is returned in ascending id order.
inline DatasetSplit split_dataset(std::vector<MovieId> ids, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must be in (0, 1)");
  if (ids.size() < 2) throw DataError("cannot split fewer than 2 movies");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw DataError("duplicate id in split input");
  Rng rng(seed);
  rng.shuffle(std::span(ids));
  const auto n = ids.size();
  auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  DatasetSplit s;
  s.seed = seed;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace boxoffice::corpus
