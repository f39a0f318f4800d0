#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "coverid/binary_io.hpp"
#include "coverid/nn/model_io.hpp"
#include "coverid/pipeline/pairs.hpp"
#include "coverid/pipeline/synthetic.hpp"
#include "coverid/pipeline/training.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace coverid;
using namespace coverid::pipeline;
namespace fs = std::filesystem;

namespace {

SongManifest toy_manifest(int cliques, int versions, Split split = Split::Train) {
  SongManifest m;
  for (int c = 0; c < cliques; ++c) {
    for (int v = 0; v < versions; ++v) {
      const std::string id = "s" + std::to_string(c) + "_" + std::to_string(v);
      m.entries.push_back({id, "c" + std::to_string(c), "chroma/" + id + ".chrm", split});
    }
  }
  return m;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coverid_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Two visibly different classes of 18x18 inputs: a bright diagonal stripe
// versus uniform noise.
MatrixDataset stripes_vs_noise(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  MatrixDataset d;
  for (int i = 0; i < n; ++i) {
    SimilarityGrid m(18, 18);
    for (Eigen::Index r = 0; r < 18; ++r) {
      for (Eigen::Index c = 0; c < 18; ++c) m(r, c) = noise(rng);
    }
    const int label = i % 2;
    if (label == kCover) {
      for (Eigen::Index r = 0; r < 18; ++r) m(r, r) += 2.0f;
    }
    d.inputs.push_back(m);
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("key = value parsing") {
    const KeyValues kv = parse_key_values("# comment\n batch_size = 8\nseed=3 # trailing\n\n");
    CHECK(kv.at("batch_size") == "8");
    CHECK(kv.at("seed") == "3");
    CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), Error);
    CHECK_THROWS_AS(parse_key_values("no equals sign\n"), Error);
  }

  TEST_CASE("training config") {
    const TrainingConfig c = training_config_from(
        parse_key_values("batch_size = 16\nstop_rule = delta\nlearning_rate = 0.01\nshuffle_labels = true\n"));
    CHECK(c.batch_size == 16);
    CHECK(c.stop_rule == StopRule::LossDelta);
    CHECK(c.adam.learning_rate == 0.01);
    CHECK(c.shuffle_labels);
    CHECK(c.loss_threshold == 1e-4);
    CHECK(c.dropout_q == 0.5);

    const TrainingConfig round = training_config_from(to_key_values(c));
    CHECK(to_key_values(round) == to_key_values(c));

    CHECK_THROWS_WITH_AS(training_config_from(parse_key_values("bogus = 1\n")), doctest::Contains("InvalidConfig"),
                         Error);
    CHECK_THROWS_AS(training_config_from(parse_key_values("batch_size = 0\n")), Error);
    CHECK_THROWS_AS(training_config_from(parse_key_values("loss_threshold = 0\n")), Error);
    CHECK_THROWS_AS(training_config_from(parse_key_values("batch_size = eight\n")), Error);
    CHECK_THROWS_AS(training_config_from(parse_key_values("stop_rule = never\n")), Error);
  }

  TEST_CASE("synthetic config") {
    const SyntheticConfig d;
    CHECK(d.cliques == 10);
    CHECK(d.versions_per_clique == 5);
    CHECK(d.dummies == 50);
    CHECK(d.noise == 0.05);
    CHECK(synthetic_config_from(to_key_values(d)).seed == d.seed);
    CHECK_THROWS_AS(synthetic_config_from(parse_key_values("versions_per_clique = 1\n")), Error);
    CHECK_THROWS_AS(synthetic_config_from(parse_key_values("min_duration = 0\n")), Error);
    CHECK_THROWS_AS(synthetic_config_from(parse_key_values("min_warp = 2\n")), Error);
    CHECK_THROWS_AS(synthetic_config_from(parse_key_values("max_transpose = 12\n")), Error);
    CHECK_THROWS_AS(synthetic_config_from(parse_key_values("colour = blue\n")), Error);
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("parse, format, validate") {
    const std::string text =
        "song_id,clique_id,chroma_path,split\n"
        "a,c1,a.chrm,train\n"
        "b,c1,b.chrm,train\n"
        "q,c2,sub/q.chrm,test-query\n"
        "d,d,d.chrm,test-dummy\n";
    const SongManifest m = parse_manifest(text, "/data");
    REQUIRE(m.entries.size() == 4);
    CHECK(m.entries[2].split == Split::TestQuery);
    CHECK(m.resolve(m.entries[2]) == fs::path("/data/sub/q.chrm"));
    CHECK(m.find("d")->clique_id == "d");
    CHECK(m.find("zz") == nullptr);
    CHECK(format_manifest(m) == text);
    CHECK_NOTHROW(validate_manifest(m));

    CHECK_THROWS_AS(parse_manifest("a,c1,a.chrm,train\n"), Error);
    CHECK_THROWS_AS(parse_manifest("song_id,clique_id,chroma_path,split\na,c1,a.chrm,holdout\n"), Error);

    SongManifest dup = m;
    dup.entries.push_back(dup.entries[0]);
    CHECK_THROWS_AS(validate_manifest(dup), Error);
    SongManifest spans = m;
    spans.entries[1].split = Split::Validation;
    CHECK_THROWS_AS(validate_manifest(spans), Error);
    SongManifest lonely = m;
    lonely.entries.push_back({"e", "c9", "e.chrm", Split::Train});
    CHECK_THROWS_AS(validate_manifest(lonely), Error);
  }
}

TEST_SUITE("pairs") {
  TEST_CASE("counts") {
    Rng rng(1);
    const PairDataset p = build_pairs(toy_manifest(2, 2), Split::Train, rng);
    CHECK(p.cover_count() == 2);
    CHECK(p.non_cover_count() == 2);

    Rng big(1);
    CHECK(build_pairs(toy_manifest(30, 11), Split::Train, big).cover_count() == 1650);

    Rng one(1);
    CHECK_THROWS_WITH_AS(build_pairs(toy_manifest(1, 5), Split::Train, one), doctest::Contains("InsufficientCliques"),
                         Error);
  }

  TEST_CASE("labels agree with cliques, no self pairs, no repeats, seeded") {
    const SongManifest m = toy_manifest(6, 4);
    std::map<std::string, std::string> clique;
    for (const auto& e : m.entries) clique[e.song_id] = e.clique_id;
    Rng a(5), b(5), c(6);
    const PairDataset p = build_pairs(m, Split::Train, a);
    CHECK(p.cover_count() == p.non_cover_count());
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : p.records) {
      CHECK(r.song_a != r.song_b);
      CHECK((clique[r.song_a] == clique[r.song_b]) == (r.label == kCover));
      CHECK(seen.insert({std::min(r.song_a, r.song_b), std::max(r.song_a, r.song_b)}).second);
    }
    CHECK(build_pairs(m, Split::Train, b).records == p.records);
    CHECK(build_pairs(m, Split::Train, c).records != p.records);
    CHECK(format_pairs(p).starts_with("song_a,song_b,label\n"));
  }

  TEST_CASE("splits are filtered") {
    SongManifest m = toy_manifest(3, 3);
    for (auto& e : m.entries) {
      if (e.clique_id == "c2") e.split = Split::TestQuery;
    }
    Rng rng(2);
    for (const auto& r : build_pairs(m, Split::Train, rng).records) {
      CHECK(m.find(r.song_a)->split == Split::Train);
      CHECK(m.find(r.song_b)->split == Split::Train);
    }
  }
}

TEST_SUITE("matrix_provider") {
  TEST_CASE("cache hits are bit-identical to recomputation") {
    const fs::path dir = scratch("provider");
    Rng rng(3);
    const ChromaSequence a = oracle::random_chroma(rng, 170, 0.0, "a");
    const ChromaSequence b = oracle::random_chroma(rng, 200, 0.0, "b");
    write_chroma(dir / "a.chrm", a);
    write_chroma(dir / "b.chrm", b);
    const SongManifest m = parse_manifest(
        "song_id,clique_id,chroma_path,split\na,x,a.chrm,test-query\nb,y,b.chrm,test-dummy\n", dir);

    auto first = PairMatrixProvider::from_manifest(m, dir / "cache");
    const auto built = first->matrix("a", "b");
    CHECK(built.values == build_pair_matrix(a, b).values);
    CHECK(first->cache_hits() == 0);
    CHECK(fs::exists(first->cache_path("a", "b")));
    CHECK(first->cache_path("a", "b") != first->cache_path("b", "a"));

    auto second = PairMatrixProvider::from_manifest(m, dir / "cache");
    const auto cached = second->matrix("a", "b");
    CHECK(second->cache_hits() == 1);
    CHECK(cached.values == built.values);
    CHECK(cached.query_id == "a");

    CHECK_THROWS_WITH_AS(second->matrix("a", "nope"), doctest::Contains("MissingMatrix"), Error);
    PairMatrixProvider memory;
    memory.add_chroma(a);
    memory.add_chroma(b);
    CHECK(memory.matrix("b", "a").values == build_pair_matrix(b, a).values);
    fs::remove_all(dir);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("identity transform reproduces the base") {
    SyntheticConfig cfg;
    Rng rng(4);
    const ChromaSequence base = random_base_song(cfg, rng, "base");
    CHECK(base.length() == 180);
    const ChromaSequence same = derive_version(base, {0, 1.0, 0.0}, rng, "v");
    CHECK(same.frames == base.frames);
    CHECK(same.song_id == "v");
  }

  TEST_CASE("base songs are piecewise constant with 1-3 classes per frame") {
    SyntheticConfig cfg;
    cfg.min_duration = 60;
    cfg.max_duration = 90;
    Rng rng(5);
    const ChromaSequence s = random_base_song(cfg, rng, "s");
    CHECK(s.length() >= 60);
    CHECK(s.length() <= 90);
    for (Eigen::Index l = 0; l < s.length(); ++l) {
      const auto active = (s.frames.col(l).array() > 0).count();
      CHECK(active >= 1);
      CHECK(active <= 3);
      CHECK(std::abs(s.frames.col(l).norm() - 1.0f) < 1e-6f);
    }
  }

  TEST_CASE("cover pairs keep a high-similarity path along the known warp") {
    SyntheticConfig cfg;
    cfg.dummies = 0;
    cfg.cliques = 3;
    cfg.train_cliques = 1;
    cfg.validation_cliques = 1;
    const SyntheticCorpus corpus = generate_synthetic_corpus(cfg);
    for (std::size_t i = 0; i < corpus.songs.size(); ++i) {
      for (std::size_t j = i + 1; j < corpus.songs.size(); ++j) {
        const auto& a = corpus.songs[i];
        const auto& b = corpus.songs[j];
        if (a.clique_id != b.clique_id) continue;
        const auto s = build_raw_pair_matrix(a.chroma, b.chroma).values;
        // Version frame f shows base frame floor(f * warp); follow a's frames
        // to the first frame of b showing the same base frame.
        int checked = 0;
        for (Eigen::Index l = 0; l < std::min<Eigen::Index>(180, a.chroma.length()); ++l) {
          const auto src = static_cast<Eigen::Index>(std::floor(double(l) * a.transform.warp));
          const auto m = static_cast<Eigen::Index>(std::ceil(double(src) / b.transform.warp));
          if (m >= std::min<Eigen::Index>(180, b.chroma.length())) continue;
          if (static_cast<Eigen::Index>(std::floor(double(m) * b.transform.warp)) != src) continue;
          CHECK(s(l, m) > 0.9f);
          ++checked;
        }
        CHECK(checked > 50);
      }
    }
  }

  TEST_CASE("default corpus shape and determinism") {
    const SyntheticConfig cfg;
    const SyntheticCorpus corpus = generate_synthetic_corpus(cfg);
    CHECK(corpus.songs.size() == 100);
    std::map<Split, int> per_split;
    for (const auto& s : corpus.songs) ++per_split[s.split];
    CHECK(per_split[Split::Train] == 25);
    CHECK(per_split[Split::Validation] == 10);
    CHECK(per_split[Split::TestQuery] == 15);
    CHECK(per_split[Split::TestDummy] == 50);

    const fs::path a = scratch("synth_a"), b = scratch("synth_b");
    const SongManifest m = write_synthetic_corpus(corpus, a);
    write_synthetic_corpus(generate_synthetic_corpus(cfg), b);
    CHECK(read_file(a / "manifest.csv") == read_file(b / "manifest.csv"));
    for (const auto& e : m.entries) CHECK(read_file(a / e.chroma_path) == read_file(b / e.chroma_path));
    CHECK(read_manifest(a / "manifest.csv").entries.size() == 100);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_SUITE("training") {
  TEST_CASE("edge cases") {
    const MatrixDataset data = stripes_vs_noise(8, 1);
    TrainingConfig cfg;
    cfg.max_epochs = 0;
    const auto spec = nn::ModelSpec::reduced();
    const TrainingResult r = train(cfg, data, data, spec);
    CHECK(r.history.empty());
    Rng init = make_stream(cfg.seed, streams::kInit);
    const auto expected = nn::init_params<float>(r.spec, init);
    CHECK(nn::encode_model(r.spec, r.params) == nn::encode_model(r.spec, expected));

    CHECK_THROWS_WITH_AS(train(cfg, MatrixDataset{}, data, spec), doctest::Contains("EmptyDataset"), Error);
    CHECK_THROWS_AS(train(cfg, data, MatrixDataset{}, spec), Error);

    TrainingConfig hot;
    hot.max_epochs = 3;
    hot.adam.learning_rate = 1e30;
    CHECK_THROWS_WITH_AS(train(hot, data, data, spec), doctest::Contains("DivergedLoss"), Error);
  }

  TEST_CASE("balanced label shuffle is independent of the true class") {
    Rng rng(12);
    for (int n0 : {0, 1, 7, 50}) {
      for (int n1 : {1, 6, 49}) {
        std::vector<int> labels(static_cast<std::size_t>(n0), kNonCover);
        labels.resize(static_cast<std::size_t>(n0 + n1), kCover);
        std::shuffle(labels.begin(), labels.end(), rng);
        const auto shuffled = balanced_label_shuffle(labels, rng);
        int table[2][2] = {};
        for (std::size_t i = 0; i < labels.size(); ++i) ++table[labels[i]][shuffled[i]];
        for (int t = 0; t < 2; ++t) CHECK(std::abs(table[t][kCover] - table[t][kNonCover]) <= 1);
        const int covers = table[0][kCover] + table[1][kCover];
        CHECK(std::abs(2 * covers - (n0 + n1)) <= 1);
      }
    }
    Rng a(3), b(3);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0, 0, 1};
    CHECK(balanced_label_shuffle(labels, a) == balanced_label_shuffle(labels, b));
  }

  TEST_CASE("batch-norm recalibration pools exact training-set statistics") {
    const MatrixDataset data = stripes_vs_noise(8, 1);
    const auto spec = nn::ModelSpec::reduced();
    Rng init(4);
    const auto params = nn::init_params<float>(spec, init);

    // One batch holding everything: the running stats become its batch stats.
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    nn::ModelSpec plain = spec;
    plain.set_dropout(0, 0);
    Rng unused(0);
    nn::ForwardCache<float> cache;
    nn::Network<float>(plain).forward(params, data.batch(all), nn::Mode::Train, &unused, &cache);

    // Uneven mini-batches (3+3+2) must pool to the same numbers.
    auto calibrated = params;
    recalibrate_batch_norm(spec, calibrated, data, 1, 3);
    int bn_layers = 0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      if (spec.layers[l].kind != nn::LayerKind::BatchNorm) continue;
      ++bn_layers;
      const auto& bn = cache.batch_norm[l];
      for (Eigen::Index c = 0; c < bn.batch_mean.size(); ++c) {
        CHECK(calibrated.layers[l].running_mean[c] == doctest::Approx(bn.batch_mean[c]).epsilon(1e-5));
        CHECK(calibrated.layers[l].running_var[c] == doctest::Approx(bn.batch_var[c]).epsilon(1e-5));
      }
    }
    CHECK(bn_layers == 1);
    // Trainable tensors are untouched.
    CHECK(calibrated.layers[0].weight.data() == params.layers[0].weight.data());
    CHECK_THROWS_AS(recalibrate_batch_norm(spec, calibrated, MatrixDataset{}), Error);
  }

  TEST_CASE("separable data converges, reproducibly") {
    const MatrixDataset train_set = stripes_vs_noise(8, 1);
    const MatrixDataset val_set = stripes_vs_noise(8, 2);
    TrainingConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 400;
    cfg.loss_threshold = 1e-3;
    cfg.dropout_p = 0.0;
    cfg.dropout_q = 0.0;
    cfg.adam.learning_rate = 3e-3;
    const auto spec = nn::ModelSpec::reduced();
    const TrainingResult a = train(cfg, train_set, val_set, spec);
    CHECK(a.converged);
    CHECK(a.history.size() < 400);
    CHECK(a.history.back().train_loss < 1e-3);
    CHECK(a.best_val_accuracy == 1.0);
    const TrainingResult b = train(cfg, train_set, val_set, spec);
    CHECK(format_history(a.history) == format_history(b.history));
    CHECK(nn::encode_model(a.spec, a.params) == nn::encode_model(b.spec, b.params));
    CHECK(format_history(a.history).starts_with("epoch,train_loss,val_accuracy\n1,"));
  }

  TEST_CASE("delta stop rule") {
    const MatrixDataset data = stripes_vs_noise(8, 3);
    TrainingConfig cfg;
    cfg.max_epochs = 50;
    cfg.stop_rule = StopRule::LossDelta;
    cfg.loss_threshold = 10.0;
    const TrainingResult r = train(cfg, data, data, nn::ModelSpec::reduced());
    CHECK(r.history.size() == 2);
    CHECK(r.converged);
  }

  TEST_CASE("validation accuracy conventions") {
    const MatrixDataset data = stripes_vs_noise(10, 4);
    const auto spec = nn::ModelSpec::reduced();
    const nn::Network<float> net(spec);
    const auto zero = nn::make_params<float>(spec);
    CHECK(validation_accuracy(net, zero, data) == 0.5);
    MatrixDataset negatives = data;
    for (auto& l : negatives.labels) l = kNonCover;
    CHECK(validation_accuracy(net, zero, negatives) == 1.0);
    for (auto& l : negatives.labels) l = kCover;
    CHECK(validation_accuracy(net, zero, negatives) == 0.0);
    CHECK_THROWS_AS(validation_accuracy(net, zero, MatrixDataset{}), Error);
  }

  TEST_CASE("grid search picks the best cell, smaller rates on ties") {
    const MatrixDataset data = stripes_vs_noise(8, 5);
    TrainingConfig cfg;
    cfg.max_epochs = 0;
    const auto one = grid_search_dropout(cfg, {0.5}, {0.25}, data, data, nn::ModelSpec::reduced());
    CHECK(one.cells.size() == 1);
    CHECK(one.best.dropout_p == 0.5);
    CHECK(one.best.dropout_q == 0.25);
    // With no training every cell ties at the initial accuracy.
    const auto tie = grid_search_dropout(cfg, {0.5, 0.25}, {0.5, 0.1}, data, data, nn::ModelSpec::reduced());
    CHECK(tie.cells.size() == 4);
    CHECK(tie.best.dropout_p == 0.25);
    CHECK(tie.best.dropout_q == 0.1);
    CHECK(tie.model.spec.dropout_p() == 0.25);

    cfg.max_epochs = 3;
    const auto two = grid_search_dropout(cfg, {0.5}, {0.25, 0.5}, data, data, nn::ModelSpec::reduced());
    CHECK(two.cells.size() == 2);
    CHECK(two.best.val_accuracy == std::max(two.cells[0].val_accuracy, two.cells[1].val_accuracy));
    CHECK_THROWS_AS(grid_search_dropout(cfg, {}, {0.5}, data, data), Error);
  }
}
