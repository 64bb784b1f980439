// Command-line front end for the box-office pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "boxoffice/cart.hpp"
#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/fgc.hpp"
#include "boxoffice/graph.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/pipeline.hpp"
#include "boxoffice/sentiment.hpp"
#include "boxoffice/synth.hpp"

namespace fs = std::filesystem;
using namespace boxoffice;

namespace {

std::map<std::string, std::string> read_config(const std::string& path) {
  if (path.empty()) return {};
  return io::parse_key_values(io::read_file(path), path);
}

bool has_magic(const std::string& path, std::string_view magic) {
  const auto bytes = io::read_file(path);
  return bytes.size() >= magic.size() && std::string_view(bytes).substr(0, magic.size()) == magic;
}

// ---------------------------------------------------------------- synth / ingest

void run_synth(const std::string& config_path, std::uint64_t seed, const std::string& out) {
  const auto config = corpus::SynthConfig::from_key_values(read_config(config_path));
  const auto data = corpus::generate_synthetic(config, seed);
  corpus::write_synthetic(data, out);
  std::cout << "wrote " << data.corpus.movies.size() << " movies, " << data.corpus.accounts.size() << " accounts, "
            << data.corpus.edges.size() << " edges, " << data.corpus.posts.size() << " posts to " << out << "\n";
}

void run_ingest(const corpus::CorpusPaths& paths, const std::string& out) {
  const auto c = corpus::ingest_corpus(paths);
  corpus::write_corpus(c, out);
  std::size_t matched = 0;
  for (const auto& a : c.actors) matched += a.has_social() ? 1 : 0;
  std::cout << "movies=" << c.movies.size() << "\naccounts=" << c.accounts.size() << "\nedges=" << c.edges.size()
            << "\nposts=" << c.posts.size() << "\nactors=" << c.actors.size() << "\nmatched=" << matched
            << "\nunknown=" << c.actors.size() - matched << "\n";
}

void run_graph_features(const std::string& corpus_dir, const std::string& out, unsigned threads) {
  const auto c = corpus::ingest_directory(corpus_dir);
  const auto gf = graph::compute_graph_features(c, threads);
  fs::create_directories(out);
  graph::save_distance_matrix(gf.distances, (fs::path(out) / "distances.bin").string());
  io::write_file((fs::path(out) / "measurements.csv").string(), graph::measurements_csv(gf.measurements, gf.graph));
  std::cout << "nodes=" << gf.graph.size() << "\nedges=" << gf.graph.edge_count() << "\n";
}

// ---------------------------------------------------------------- sentiment

void run_sentiment_train(const std::string& data, const std::string& out, const sentiment::TrainHyper& hyper) {
  const auto labeled = corpus::read_sentiment_training(data);
  const auto result = sentiment::train_sentiment(labeled, hyper);
  sentiment::save_model(result.model, out);
  std::size_t correct = 0;
  for (const auto& ex : labeled) correct += sentiment::classify(result.model, ex.text).positive == ex.positive;
  std::cout << "vocabulary=" << result.model.vocabulary.size() << "\nfinal_loss="
            << io::format_double(result.loss_history.back())
            << "\ntrain_accuracy=" << io::format_double(static_cast<double>(correct) / labeled.size()) << "\n";
}

std::map<corpus::MovieId, sentiment::SentimentSummary> summarize(const sentiment::SentimentModel& model,
                                                                 const corpus::Corpus& c) {
  return sentiment::summarize_corpus(model, c);
}

void run_sentiment_summarize(const std::string& model_path, const std::string& corpus_dir, const std::string& out) {
  const auto model = sentiment::load_model(model_path);
  const auto c = corpus::ingest_directory(corpus_dir);
  sentiment::write_summaries(summarize(model, c), out);
  std::cout << "summarized " << c.movies.size() << " movies to " << out << "\n";
}

// ---------------------------------------------------------------- features

struct FeatureArgs {
  std::string corpus_dir;
  std::string out;
  std::string summaries;
  std::string sentiment_model;
  std::uint64_t seed = 0;
  std::size_t max_cast = 16;
  std::optional<double> threshold;
  unsigned threads = 1;
};

void run_features_build(const FeatureArgs& a) {
  const auto c = corpus::ingest_directory(a.corpus_dir);
  std::map<corpus::MovieId, sentiment::SentimentSummary> summaries;
  if (!a.summaries.empty()) {
    summaries = sentiment::read_summaries(a.summaries);
  } else if (!a.sentiment_model.empty()) {
    summaries = summarize(sentiment::load_model(a.sentiment_model), c);
  } else {
    const auto train_file = fs::path(a.corpus_dir) / "sentiment_train.csv";
    if (!fs::exists(train_file)) {
      throw UsageError("features build: pass --summaries or --sentiment-model, or put sentiment_train.csv in the corpus");
    }
    summaries = summarize(sentiment::train_sentiment(corpus::read_sentiment_training(train_file.string())).model, c);
  }
  pipeline::FeatureOptions opt;
  opt.max_cast = a.max_cast;
  opt.threshold = a.threshold;
  opt.seed = a.seed;
  opt.threads = a.threads;
  const auto features = pipeline::build_feature_set(c, summaries, opt);
  pipeline::save_feature_set(features, a.out);
  if (features.truncated > 0) {
    std::cerr << "warning: " << features.truncated << " casts truncated to L=" << features.max_cast << "\n";
  }
  std::cout << "movies=" << features.movies.size() << "\ntrain=" << features.split.train.size()
            << "\ntest=" << features.split.test.size() << "\nL=" << features.max_cast << "\nP=" << features.path_dims
            << "\nthreshold=" << io::format_double(features.threshold) << "\n";
}

// ---------------------------------------------------------------- train

void print_cart_report(const pipeline::CartReport& r) {
  std::cout << "train_r2=" << io::format_double(r.train_r2) << "\ntest_r2=" << io::format_double(r.test_r2)
            << "\ntrain_mad=" << io::format_double(r.train_mad) << "\ntest_mad=" << io::format_double(r.test_mad)
            << "\n\n"
            << r.dump;
}

void run_train(const std::string& kind, const std::string& features_dir, const std::string& config_path,
               std::optional<std::uint64_t> seed, const std::string& out) {
  const auto features = pipeline::load_feature_set(features_dir);
  const auto kv = read_config(config_path);
  if (kind == "cart") {
    const auto report = pipeline::run_cart_baseline(features, pipeline::parse_tree_params(kv));
    io::write_file(out, cart::serialize_tree(report.tree));
    print_cart_report(report);
    return;
  }
  fgc::FgcConfig base;
  base.L = features.max_cast;
  base.P = features.path_dims;
  auto config = fgc::parse_config(kv, base);
  if (seed) config.seed = *seed;
  if (config.L != features.max_cast || config.P != features.path_dims) {
    throw UsageError("config L/P (" + std::to_string(config.L) + ", " + std::to_string(config.P) +
                     ") do not match the features (" + std::to_string(features.max_cast) + ", " +
                     std::to_string(features.path_dims) + ")");
  }
  auto model = fgc::build_model(config);
  model.set_norm_stats(features.norm);
  const auto history = fgc::train(model, features.train_inputs());
  fgc::save_model(model, out);
  for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
    std::cout << "epoch " << std::setw(3) << e + 1 << "  loss " << io::format_double(history.epoch_loss[e])
              << "  running_acc " << io::format_double(history.epoch_accuracy[e]) << "\n";
  }
  const auto report = fgc::evaluate(model, features.train_inputs());
  std::cout << "train_accuracy=" << io::format_double(report.accuracy) << "\n";
}

// ---------------------------------------------------------------- evaluate / predict

void run_evaluate(const std::string& model_path, const std::string& features_dir, const std::string& split) {
  const auto features = pipeline::load_feature_set(features_dir);
  const auto& ids = split == "train" ? features.split.train : features.split.test;
  if (has_magic(model_path, cart::kTreeMagic)) {
    auto r = io::BinaryReader::open(model_path);
    const auto tree = cart::deserialize_tree(r);
    r.expect_end();
    const auto data = pipeline::cart_data(features, ids);
    const auto pred = cart::predict_rows(tree, data.x);
    std::vector<corpus::ClassLabel> actual;
    std::vector<corpus::ClassLabel> predicted;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      actual.push_back(corpus::label_for(data.y[k], features.threshold));
      predicted.push_back(corpus::label_for(pred[k], features.threshold));
    }
    const auto report = fgc::evaluate_labels(actual, predicted);
    std::cout << fgc::format_report_table(report) << "\n" << fgc::format_report_kv(report);
    std::cout << "r2=" << io::format_double(cart::r_squared(data.y, pred))
              << "\nmad=" << io::format_double(cart::mean_abs_dev(data.y, pred)) << "\n";
    return;
  }
  const auto model = fgc::load_model(model_path);
  const auto report = fgc::evaluate(model, features.normalized(ids));
  std::cout << fgc::format_report_table(report) << "\n" << fgc::format_report_kv(report);
}

void run_predict(const std::string& model_path, const std::string& features_dir, corpus::MovieId id) {
  const auto features = pipeline::load_feature_set(features_dir);
  const auto& movie = features.movie(id);
  const auto actual = corpus::to_char(movie.input.label);
  std::cout << "movie_id  name  box_office_10k  actual  predicted  probability\n";
  if (has_magic(model_path, cart::kTreeMagic)) {
    auto r = io::BinaryReader::open(model_path);
    const auto tree = cart::deserialize_tree(r);
    r.expect_end();
    const double value = cart::predict_tree(tree, pipeline::cart_row(movie.input));
    std::cout << id << "  " << movie.name << "  " << io::format_double(movie.box_office) << "  " << actual << "  "
              << corpus::to_char(corpus::label_for(value, features.threshold)) << "  -\n";
    std::cout << "predicted_box_office_10k=" << io::format_double(value) << "\n";
    return;
  }
  const auto model = fgc::load_model(model_path);
  const auto p = fgc::predict(model, repr::apply_normalization(movie.input, features.norm));
  std::cout << id << "  " << movie.name << "  " << io::format_double(movie.box_office) << "  " << actual << "  "
            << corpus::to_char(p.label) << "  " << std::fixed << std::setprecision(4) << p.probability << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box-office prediction pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", config_path, "key = value synthetic config")->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output directory")->required();

  corpus::CorpusPaths paths;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalise corpus files");
  ingest->add_option("--movies", paths.movies)->required();
  ingest->add_option("--accounts", paths.accounts)->required();
  ingest->add_option("--edges", paths.edges)->required();
  ingest->add_option("--posts", paths.posts)->required();
  ingest->add_option("--out", out, "Output corpus directory")->required();

  std::string corpus_dir;
  unsigned threads = 1;
  auto* gfeat = app.add_subcommand("graph-features", "Distance matrix and measurement table");
  gfeat->add_option("--corpus", corpus_dir)->required();
  gfeat->add_option("--out", out)->required();
  gfeat->add_option("--threads", threads)->check(CLI::PositiveNumber);

  auto* sent = app.add_subcommand("sentiment", "Sentiment classifier");
  sent->require_subcommand(1);
  std::string data_path;
  std::string model_path;
  sentiment::TrainHyper hyper;
  auto* strain = sent->add_subcommand("train", "Train the bigram logistic classifier");
  strain->add_option("--data", data_path)->required();
  strain->add_option("--out", out)->required();
  strain->add_option("--lr", hyper.lr);
  strain->add_option("--epochs", hyper.epochs);
  strain->add_option("--l2", hyper.l2);
  strain->add_option("--min-df", hyper.min_df);
  auto* ssum = sent->add_subcommand("summarize", "Per-movie sentiment counts");
  ssum->add_option("--model", model_path)->required();
  ssum->add_option("--corpus", corpus_dir)->required();
  ssum->add_option("--out", out)->required();

  auto* feat = app.add_subcommand("features", "Model inputs");
  feat->require_subcommand(1);
  FeatureArgs fa;
  double threshold = 0.0;
  auto* fbuild = feat->add_subcommand("build", "Build inputs, split and normalisation");
  fbuild->add_option("--corpus", fa.corpus_dir)->required();
  fbuild->add_option("--out", fa.out)->required();
  fbuild->add_option("--summaries", fa.summaries, "Sentiment summary CSV");
  fbuild->add_option("--sentiment-model", fa.sentiment_model, "Sentiment model used to summarise posts");
  fbuild->add_option("--seed", fa.seed, "Split seed");
  fbuild->add_option("--L", fa.max_cast, "Maximum cast length")->check(CLI::PositiveNumber);
  auto* thr_opt = fbuild->add_option("--threshold", threshold, "Class threshold (default: corpus median)");
  fbuild->add_option("--threads", fa.threads)->check(CLI::PositiveNumber);

  std::string kind;
  std::string features_dir;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("kind", kind, "cart or fgc")->required()->check(CLI::IsMember({"cart", "fgc"}));
  train->add_option("--features", features_dir)->required();
  train->add_option("--config", config_path)->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", seed);
  train->add_option("--out", out)->required();

  std::string split = "test";
  auto* eval = app.add_subcommand("evaluate", "Evaluate a model on a split");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--features", features_dir)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));

  corpus::MovieId movie_id = 0;
  auto* pred = app.add_subcommand("predict", "Predict one movie");
  pred->add_option("--model", model_path)->required();
  pred->add_option("--movie-id", movie_id)->required();
  pred->add_option("--features", features_dir, "Features directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      run_synth(config_path, seed, out);
    } else if (*ingest) {
      run_ingest(paths, out);
    } else if (*gfeat) {
      run_graph_features(corpus_dir, out, threads);
    } else if (*strain) {
      run_sentiment_train(data_path, out, hyper);
    } else if (*ssum) {
      run_sentiment_summarize(model_path, corpus_dir, out);
    } else if (*fbuild) {
      if (*thr_opt) fa.threshold = threshold;
      run_features_build(fa);
    } else if (*train) {
      run_train(kind, features_dir, config_path, *seed_opt ? std::optional(seed) : std::nullopt, out);
    } else if (*eval) {
      run_evaluate(model_path, features_dir, split);
    } else if (*pred) {
      run_predict(model_path, features_dir, movie_id);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
