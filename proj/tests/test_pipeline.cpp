#include <gtest/gtest.h>

#include "boxoffice/pipeline.hpp"
#include "boxoffice/synth.hpp"
#include "support.hpp"

using namespace boxoffice;
using namespace boxoffice::pipeline;

namespace {

corpus::SyntheticData small_synth(std::uint64_t seed = 5) {
  corpus::SynthConfig c;
  c.n_movies = 60;
  c.n_actors = 40;
  c.n_accounts = 25;
  c.posts_per_movie = 5;
  c.n_sentiment_train = 60;
  return corpus::generate_synthetic(c, seed);
}

std::map<MovieId, sentiment::SentimentSummary> summaries_for(const corpus::SyntheticData& d) {
  const auto model = sentiment::train_sentiment(d.sentiment_train).model;
  return sentiment::summarize_corpus(model, d.corpus);
}

}  // namespace

TEST(FeatureSet, ShapesSplitAndLabels) {
  const auto d = small_synth();
  FeatureOptions opt;
  opt.max_cast = 6;
  opt.seed = 2;
  const auto fs = build_feature_set(d.corpus, summaries_for(d), opt);
  EXPECT_EQ(fs.movies.size(), 60u);
  EXPECT_EQ(fs.split.train.size(), 48u);
  EXPECT_EQ(fs.split.test.size(), 12u);
  EXPECT_EQ(fs.path_dims, 25u);
  EXPECT_EQ(fs.threshold, corpus::median_box_office(d.corpus));
  for (std::size_t k = 1; k < fs.movies.size(); ++k) EXPECT_LT(fs.movies[k - 1].input.movie_id, fs.movies[k].input.movie_id);
  for (const auto& m : fs.movies) {
    EXPECT_EQ(m.input.max_cast, 6u);
    EXPECT_EQ(m.input.actor_seq.size(), 6u * repr::kActorDims);
    EXPECT_EQ(m.input.path_block.size(), 6u * 25u);
    EXPECT_EQ(m.input.label, corpus::label_for(m.box_office, fs.threshold));
  }
  for (const auto& in : fs.train_inputs()) {
    for (double v : in.meta) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(fs.movie(999999), UsageError);
}

TEST(FeatureSet, TestGrossesDoNotLeakIntoTrainingInputs) {
  auto d = small_synth();
  FeatureOptions opt;
  opt.threshold = 100.0;
  opt.seed = 1;
  const auto summaries = summaries_for(d);
  const auto base = build_feature_set(d.corpus, summaries, opt);
  for (auto& m : d.corpus.movies) {
    if (std::find(base.split.test.begin(), base.split.test.end(), m.id) != base.split.test.end()) m.box_office *= 7.0;
  }
  const auto changed = build_feature_set(d.corpus, summaries, opt);
  for (auto id : base.split.train) EXPECT_EQ(changed.movie(id).input, base.movie(id).input);
  EXPECT_EQ(changed.norm, base.norm);
}

TEST(FeatureSet, TruncationCounted) {
  const auto d = small_synth();
  FeatureOptions opt;
  opt.max_cast = 1;
  const auto fs = build_feature_set(d.corpus, {}, opt);
  EXPECT_GT(fs.truncated, 0u);
  for (const auto& m : fs.movies) EXPECT_EQ(m.input.cast_len, 1u);
}

TEST(FeatureSet, DirectoryRoundTrip) {
  const auto d = small_synth();
  const auto fs = build_feature_set(d.corpus, summaries_for(d), {});
  const auto dir = testing_support::temp_dir("features");
  save_feature_set(fs, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / kFeaturesFile));
  EXPECT_TRUE(std::filesystem::exists(dir / kNormFile));
  EXPECT_EQ(load_feature_set(dir), fs);
  EXPECT_THROW(load_feature_set(dir / "missing"), Error);
}

TEST(Cart, FeatureRowIsMetaThenCastMean) {
  repr::MovieInput in;
  in.max_cast = 3;
  in.path_dims = 1;
  in.cast_len = 2;
  in.meta = {1, 2, 3, 4, 5};
  in.actor_seq.assign(3 * repr::kActorDims, 0.0);
  in.path_block.assign(3, 0.0);
  in.actor_seq[1 * repr::kActorDims] = 2.0;
  in.actor_seq[2 * repr::kActorDims] = 4.0;
  in.actor_seq[2 * repr::kActorDims + repr::kMeasurementDims] = 10.0;
  const auto row = cart_row(in);
  ASSERT_EQ(row.size(), cart_feature_names().size());
  EXPECT_EQ(row.size(), 16u);
  EXPECT_EQ(row[0], 1.0);
  EXPECT_EQ(row[4], 5.0);
  EXPECT_EQ(row[5], 3.0);
  EXPECT_EQ(row[15], 5.0);
  EXPECT_EQ(cart_feature_names()[15], "mean_art");
}

TEST(Cart, BaselineRuns) {
  const auto d = small_synth();
  const auto fs = build_feature_set(d.corpus, summaries_for(d), {});
  cart::TreeParams p;
  p.max_depth.reset();
  const auto r = run_cart_baseline(fs, p);
  EXPECT_LE(r.train_r2, 1.0);
  EXPECT_GE(r.train_mad, 0.0);
  EXPECT_TRUE(std::isfinite(r.test_r2));
  EXPECT_NE(r.dump.find("leaf"), std::string::npos);
  const auto shallow = run_cart_baseline(fs, parse_tree_params({{"max_depth", "1"}}));
  EXPECT_LE(shallow.tree.depth(), 1u);
  EXPECT_GE(r.train_r2, shallow.train_r2);
}

TEST(Cart, TreeParamParsing) {
  EXPECT_FALSE(parse_tree_params({{"max_depth", "inf"}}).max_depth.has_value());
  EXPECT_FALSE(parse_tree_params({{"max_depth", "none"}}).max_depth.has_value());
  EXPECT_EQ(parse_tree_params({{"max_depth", "4"}, {"min_samples_leaf", "3"}}).min_samples_leaf, 3u);
  EXPECT_THROW(parse_tree_params({{"depth", "4"}}), UsageError);
  EXPECT_THROW(parse_tree_params({{"min_samples_leaf", "0"}}), UsageError);
}
