// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Graph oracles come from support.hpp.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "boxoffice/cart.hpp"
#include "boxoffice/fgc.hpp"
#include "boxoffice/graph.hpp"
#include "boxoffice/nn.hpp"
#include "boxoffice/pipeline.hpp"
#include "boxoffice/sentiment.hpp"
#include "boxoffice/synth.hpp"
#include "support.hpp"

using namespace boxoffice;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// ---------------------------------------------------------------- graphs

Outcome apsp_oracle() {
  Rng rng(2024);
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    const auto n = 1 + rng.below(50);
    const double p = std::array{0.05, 0.2, 0.5}[k % 3];
    const auto g = testing_support::random_graph(n, p, rng);
    const auto d = graph::all_pairs_shortest_paths(g);
    const auto oracle = testing_support::floyd_warshall_clamped(g);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mismatches += d(i, j) != oracle[i][j];
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, "100 graphs, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 2) + " s"};
}

Outcome betweenness_oracle() {
  Rng rng(7);
  double worst = 0.0;
  const int graphs = 1000;
  for (int k = 0; k < graphs; ++k) {
    const auto n = 1 + rng.below(7);
    const auto g = testing_support::random_graph(n, rng.uniform(0.05, 0.95), rng);
    const auto got = graph::betweenness(g);
    const auto want = testing_support::brute_force_betweenness(g);
    for (std::size_t v = 0; v < n; ++v) worst = std::max(worst, std::abs(got[v] - want[v]));
  }
  return {worst <= 1e-9, std::to_string(graphs) + " graphs with n <= 7, max abs error " + fmt(worst, 12)};
}

Outcome sentinel_semantics() {
  Rng rng(99);
  std::size_t bad = 0;
  std::size_t pairs = 0;
  for (int k = 0; k < 200; ++k) {
    const auto n = 1 + rng.below(40);
    const auto g = testing_support::random_graph(n, rng.uniform(0.0, 0.15), rng);
    const auto d = graph::all_pairs_shortest_paths(g);
    for (std::size_t s = 0; s < n; ++s) {
      const auto hops = graph::bfs_distances(g, s);
      for (std::size_t t = 0; t < n; ++t) {
        ++pairs;
        if (s == t) bad += d(s, t) != 0;
        else if (hops[t] < 0) bad += d(s, t) != 9;
      }
    }
  }
  return {bad == 0, std::to_string(pairs) + " pairs checked, " + std::to_string(bad) + " violations"};
}

// ---------------------------------------------------------------- sentiment

Outcome sentiment_table_row() {
  corpus::Movie movie{1, "大风", 2015, 1.0, {"x"}};
  std::vector<corpus::Post> posts;
  for (int k = 0; k < 168; ++k) posts.push_back({k < 135 ? "pos" : "neg", false, 1, {}});
  const auto s = sentiment::summarize_movie(movie, posts, [](const std::string& t) { return t == "pos"; });
  const bool ok = s.positive == 135 && s.negative == 33 && s.total == 168 && std::abs(s.ratio - 4.0909) <= 1e-4;
  return {ok, "(" + std::to_string(s.positive) + ", " + std::to_string(s.negative) + ", " + std::to_string(s.total) +
                  ", " + fmt(s.ratio) + ")"};
}

Outcome sentiment_accuracy() {
  corpus::SynthConfig c;
  c.n_movies = 10;
  c.n_actors = 20;
  c.n_accounts = 10;
  c.n_sentiment_train = 400;
  const auto docs = corpus::generate_synthetic(c, 11).sentiment_train;
  const auto t0 = Clock::now();
  const auto model = sentiment::train_sentiment(docs).model;
  std::size_t correct = 0;
  for (const auto& d : docs) correct += sentiment::classify(model, d.text).positive == d.positive;
  const double secs = seconds_since(t0);
  const double acc = static_cast<double>(correct) / static_cast<double>(docs.size());
  return {docs.size() == 400 && acc >= 0.95 && secs < 5.0,
          std::to_string(docs.size()) + " docs, accuracy " + fmt(acc) + ", " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------- cart

Outcome gini_values() {
  bool ok = cart::gini_impurity(std::vector<std::uint64_t>{9}) == 0.0;
  for (std::size_t k = 2; k <= 4; ++k) {
    ok = ok && cart::gini_impurity(std::vector<std::uint64_t>(k, 5)) == 1.0 - 1.0 / static_cast<double>(k);
  }
  const double g31 = cart::gini_impurity(std::vector<std::uint64_t>{3, 1});
  ok = ok && std::abs(g31 - 0.375) <= 1e-12;
  return {ok, "{3,1} -> " + fmt(g31, 12)};
}

Outcome cart_exactness() {
  Rng rng(31);
  cart::Matrix x;
  std::set<std::vector<double>> seen;
  while (x.size() < 100) {
    std::vector<double> row = {std::round(rng.uniform(0, 50)), std::round(rng.uniform(0, 50))};
    if (seen.insert(row).second) x.push_back(row);
  }
  std::vector<double> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(rng.uniform(0, 1000));
  cart::TreeParams p;
  p.max_depth.reset();
  p.min_samples_leaf = 1;
  const auto t = cart::fit_tree(x, y, p);
  const double r2 = cart::r_squared(y, cart::predict_rows(t, x));
  return {std::abs(r2 - 1.0) <= 1e-12, "training R^2 " + fmt(r2, 12)};
}

// ---------------------------------------------------------------- gradient checks

template <class Layer>
std::vector<nn::Param> params_of(Layer& layer) {
  std::vector<nn::Param> p;
  layer.collect(p, "layer");
  return p;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  double dense = 0.0, gru = 0.0, conv = 0.0, soft = 0.0, full = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(1000 + seed);
    {
      nn::DenseLayer layer(3, 2, nn::Activation::identity);
      const auto ps = params_of(layer);
      testing_support::randomize(ps, rng);
      const auto x = testing_support::random_vector(3, rng);
      const auto w = testing_support::random_vector(2, rng);
      nn::zero_grads(ps);
      nn::DenseLayer::Cache cache;
      layer.forward(x, &cache);
      layer.backward(cache, w);
      dense = std::max(dense, nn::grad_check(ps, [&] { return testing_support::weighted_sum(layer.forward(x), w); })
                                  .max_rel_error);
    }
    {
      nn::GruLayer layer(3, 4);
      const auto ps = params_of(layer);
      testing_support::randomize(ps, rng);
      const auto seq = testing_support::random_vector(12, rng);
      const auto h0 = testing_support::random_vector(4, rng, -0.5, 0.5);
      const auto w = testing_support::random_vector(4, rng);
      nn::zero_grads(ps);
      nn::GruLayer::Cache cache;
      layer.forward(seq, 4, h0, &cache);
      layer.backward(cache, w);
      gru = std::max(gru, nn::grad_check(ps, [&] {
                            return testing_support::weighted_sum(layer.forward(seq, 4, h0), w);
                          }).max_rel_error);
    }
    {
      nn::Conv2dLayer layer(1, 2, 3, 3);
      const auto ps = params_of(layer);
      testing_support::randomize(ps, rng);
      nn::Tensor x({1, 6, 6});
      x.data = testing_support::random_vector(36, rng);
      nn::Conv2dLayer::Cache cache;
      const auto y = layer.forward(x, &cache);
      nn::Tensor dy(y.shape);
      dy.data = testing_support::random_vector(y.size(), rng);
      nn::zero_grads(ps);
      layer.backward(cache, dy);
      conv = std::max(conv, nn::grad_check(ps, [&] {
                              return testing_support::weighted_sum(layer.forward(x).data, dy.data);
                            }).max_rel_error);
    }
    {
      nn::Tensor z({4}), dz({4});
      z.data = testing_support::random_vector(4, rng, -3, 3);
      const auto target = rng.below(4);
      dz.data = nn::softmax_xent(z.data, target).gradient;
      const std::vector<nn::Param> ps = {{"logits", &z, &dz, false}};
      soft = std::max(soft, nn::grad_check(ps, [&] { return nn::softmax_xent(z.data, target).loss; }).max_rel_error);
    }
    {
      fgc::FgcConfig c;
      c.L = 4;
      c.P = 8;
      c.fc_hidden = c.gru_hidden = c.merge_hidden = 3;
      c.cnn_channels = {3, 3, 3, 3, 3};
      auto model = fgc::build_model(c, seed);
      auto ps = model.params();
      testing_support::randomize(ps, rng);
      repr::MovieInput in;
      in.max_cast = 4;
      in.path_dims = 8;
      in.cast_len = 4;
      in.label = seed % 2 ? corpus::ClassLabel::B : corpus::ClassLabel::A;
      for (auto& v : in.meta) v = rng.uniform(0, 1);
      in.actor_seq = testing_support::random_vector(4 * repr::kActorDims, rng, 0, 1);
      in.path_block = testing_support::random_vector(4 * 8, rng, 0, 1);
      nn::zero_grads(ps);
      fgc::accumulate_example(model, in, 1.0);
      nn::l2_penalty(ps, c.lambda_l2);
      full = std::max(full, nn::grad_check(ps, [&] {
                              return nn::softmax_xent(model.logits(in), fgc::class_index(in.label)).loss +
                                     nn::l2_penalty(ps, c.lambda_l2, false);
                            }).max_rel_error);
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = dense < 1e-6 && gru < 1e-4 && conv < 1e-4 && soft < 1e-4 && full < 1e-4 && secs < 30.0;
  std::ostringstream d;
  d << std::scientific << std::setprecision(2) << "max rel err dense " << dense << ", gru " << gru << ", conv " << conv
    << ", softmax " << soft << ", full " << full << ", " << std::fixed << secs << " s";
  return {ok, d.str()};
}

Outcome gru_padding() {
  Rng rng(42);
  nn::GruLayer gru(repr::kActorDims, 16);
  gru.init(rng);
  const auto body = testing_support::random_vector(6 * repr::kActorDims, rng, 0, 1);
  const std::vector<double> h0(16, 0.0);
  std::vector<std::vector<double>> outs;
  for (std::size_t pad : {0u, 5u, 50u}) {
    std::vector<double> seq(pad * repr::kActorDims, 0.0);
    seq.insert(seq.end(), body.begin(), body.end());
    outs.push_back(gru.forward(seq, 6 + pad, h0));
  }
  const bool ok = outs[0] == outs[1] && outs[0] == outs[2];
  return {ok, "pad lengths 0, 5, 50"};
}

// ---------------------------------------------------------------- end to end

struct RunResult {
  double train_acc = 0.0;
  double test_acc = 0.0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::string checkpoint;
  std::string report;
};

pipeline::FeatureSet synth_features(double signal, std::uint64_t synth_seed, std::uint64_t split_seed) {
  corpus::SynthConfig sc;
  sc.signal = signal;
  const auto data = corpus::generate_synthetic(sc, synth_seed);
  const auto model = sentiment::train_sentiment(data.sentiment_train).model;
  pipeline::FeatureOptions opt;
  opt.max_cast = 16;
  opt.seed = split_seed;
  return pipeline::build_feature_set(data.corpus, sentiment::summarize_corpus(model, data.corpus), opt);
}

RunResult train_and_score(const pipeline::FeatureSet& fs, std::uint64_t train_seed) {
  fgc::FgcConfig c;
  c.L = fs.max_cast;
  c.P = fs.path_dims;
  c.seed = train_seed;
  auto model = fgc::build_model(c);
  model.set_norm_stats(fs.norm);
  const auto history = fgc::train(model, fs.train_inputs());
  RunResult r;
  r.train_acc = fgc::evaluate(model, fs.train_inputs()).accuracy;
  const auto test = fgc::evaluate(model, fs.test_inputs());
  r.test_acc = test.accuracy;
  r.first_loss = history.epoch_loss.front();
  r.last_loss = history.epoch_loss.back();
  r.checkpoint = fgc::serialize_model(model);
  r.report = fgc::format_report_kv(test);
  return r;
}

RunResult g_signal_run;  // reused by the determinism check

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const auto fs = synth_features(1.0, 7, 1);
  g_signal_run = train_and_score(fs, 3);
  const double secs = seconds_since(t0);
  const auto& r = g_signal_run;
  const bool strong = r.train_acc >= 0.95 && r.test_acc >= 0.80 && r.last_loss < r.first_loss && secs < 300.0;

  double null_sum = 0.0;
  std::string null_list;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto null_fs = synth_features(0.0, 100 + s, s);
    const auto nr = train_and_score(null_fs, s);
    null_sum += nr.test_acc;
    null_list += (s ? " " : "") + fmt(nr.test_acc, 3);
  }
  const double null_mean = null_sum / 5.0;
  const bool null_ok = null_mean >= 0.40 && null_mean <= 0.60;
  return {strong && null_ok, "signal 1: P=" + std::to_string(fs.path_dims) + " train " + fmt(r.train_acc) + ", held-out " +
                                 fmt(r.test_acc) + ", " + fmt(secs, 1) + " s; signal 0 held-out [" + null_list +
                                 "] mean " + fmt(null_mean, 3)};
}

Outcome determinism() {
  const auto fs = synth_features(1.0, 7, 1);
  const auto again = train_and_score(fs, 3);
  const bool ok = !g_signal_run.checkpoint.empty() && again.checkpoint == g_signal_run.checkpoint &&
                  again.report == g_signal_run.report;
  return {ok, "checkpoint " + std::to_string(again.checkpoint.size()) + " bytes, report compared byte for byte"};
}

Outcome split_arithmetic() {
  std::vector<corpus::MovieId> ids(1296);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<corpus::MovieId>(i + 1);
  const auto s = corpus::split_dataset(ids, 0.8, 0);
  return {s.train.size() == 1036 && s.test.size() == 260,
          std::to_string(s.train.size()) + " train / " + std::to_string(s.test.size()) + " test"};
}

Outcome round_trips() {
  const auto dir = testing_support::temp_dir("acceptance");
  Rng rng(3);
  const auto d = graph::all_pairs_shortest_paths(testing_support::random_graph(30, 0.1, rng));
  graph::save_distance_matrix(d, (dir / "d.bin").string());
  const bool dm = graph::load_distance_matrix((dir / "d.bin").string()) == d;

  const auto sm = sentiment::train_sentiment({{"好看好看", true}, {"难看难看", false}}).model;
  sentiment::save_model(sm, (dir / "s.bin").string());
  const bool sent = sentiment::load_model((dir / "s.bin").string()) == sm;

  bool ck = false;
  if (!g_signal_run.checkpoint.empty()) {
    io::BinaryReader r(g_signal_run.checkpoint, "mem");
    const auto model = fgc::deserialize_model(r);
    fgc::save_model(model, (dir / "m.bin").string());
    ck = fgc::load_model((dir / "m.bin").string()) == model && io::read_file((dir / "m.bin").string()) == g_signal_run.checkpoint;
  }
  std::filesystem::remove_all(dir);
  return {dm && sent && ck, std::string("distance ") + (dm ? "ok" : "differs") + ", sentiment " + (sent ? "ok" : "differs") +
                                ", checkpoint " + (ck ? "ok" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"APSP equals Floyd-Warshall with clamp at 9", apsp_oracle},
      {"betweenness equals path enumeration", betweenness_oracle},
      {"unreachable pairs are 9, self distance 0", sentinel_semantics},
      {"forced 135/33 sentiment summary", sentiment_table_row},
      {"sentiment classifier on 400 synthetic docs", sentiment_accuracy},
      {"gini impurity values", gini_values},
      {"unlimited-depth CART fits distinct rows exactly", cart_exactness},
      {"finite-difference gradient checks", gradient_checks},
      {"GRU absorbs front zero padding", gru_padding},
      {"end-to-end learning on synthetic corpus", end_to_end},
      {"train fgc is deterministic", determinism},
      {"split of 1296 ids at 0.8", split_arithmetic},
      {"file round-trips", round_trips},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << ": " << criteria[k].first << " (" << o.detail
              << ")" << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
