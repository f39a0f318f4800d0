#include <filesystem>

#include "coverid/cross_similarity.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace coverid;

namespace {

PitchProfile one_hot(int c) {
  PitchProfile p;
  p.energies.setZero();
  p.energies[c] = 1;
  return p;
}

ChromaSequence frames_of(std::initializer_list<int> classes) {
  ChromaSequence s;
  s.frames = ChromaMatrix<float>::Zero(12, static_cast<Eigen::Index>(classes.size()));
  Eigen::Index l = 0;
  for (int c : classes) s.frames(c, l++) = 1;
  return s;
}

}  // namespace

TEST_SUITE("cross_similarity") {
  TEST_CASE("OTI examples") {
    CHECK(compute_oti(one_hot(0), one_hot(0)) == 0);
    CHECK(compute_oti(one_hot(0), one_hot(3)) == 9);
    PitchProfile uniform;
    uniform.energies.setConstant(1 / std::sqrt(12.0f));
    CHECK(compute_oti(uniform, uniform) == 0);
    PitchProfile zero;
    zero.energies.setZero();
    CHECK(compute_oti(zero, zero) == 0);
  }

  TEST_CASE("OTI agrees with exhaustive rotation search") {
    Rng rng(11);
    std::uniform_real_distribution<float> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
      PitchProfile a, b;
      for (int c = 0; c < 12; ++c) {
        a.energies[c] = u(rng);
        b.energies[c] = u(rng);
      }
      a.energies.normalize();
      b.energies.normalize();
      CHECK(compute_oti(a, b) == oracle::oti(a.energies, b.energies));
    }
  }

  TEST_CASE("transpose") {
    const ChromaSequence s = frames_of({2, 2, 7});
    CHECK(transpose_chroma(s, 0).frames == s.frames);
    const ChromaSequence up = transpose_chroma(s, 3);
    CHECK(up.frames == frames_of({5, 5, 10}).frames);
    CHECK(transpose_chroma(s, 11).frames == frames_of({1, 1, 6}).frames);
    CHECK_THROWS_AS(transpose_chroma(s, 12), Error);
    CHECK_THROWS_AS(transpose_chroma(s, -1), Error);
  }

  TEST_CASE("distance matrix") {
    const ChromaSequence single = frames_of({4});
    CHECK(distance_matrix(single, single).values(0, 0) == 0.0);

    const ChromaSequence ab = frames_of({0, 1});
    const DistanceMatrix d = distance_matrix(ab, ab);
    CHECK(d.values(0, 0) == 0.0);
    CHECK(d.values(1, 1) == 0.0);
    CHECK(d.values(0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(d.values(1, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    Rng rng(5);
    const ChromaSequence a = oracle::random_chroma(rng, 40), b = oracle::random_chroma(rng, 30);
    const DistanceMatrix ab2 = distance_matrix(a, b);
    CHECK(ab2.values.rows() == 40);
    CHECK(ab2.values.cols() == 30);
    CHECK(ab2.values.maxCoeff() <= 2.0);
    CHECK(ab2.values.minCoeff() >= 0.0);
    const DistanceMatrix aa = distance_matrix(a, a);
    CHECK(aa.values == aa.values.transpose());
    CHECK(aa.values.diagonal().isZero(0));
  }

  TEST_CASE("similarity from distance") {
    DistanceMatrix d;
    d.values.resize(2, 2);
    d.values << 0, std::sqrt(2.0), std::sqrt(2.0), 0;
    SimilarityGrid expected(2, 2);
    expected << 1, 0, 0, 1;
    CHECK(similarity_from_distance(d).values == expected);

    d.values.resize(1, 1);
    d.values << 0;
    CHECK(similarity_from_distance(d).values(0, 0) == 1.0f);

    d.values.resize(2, 2);
    d.values << 1, 3, 2, 3;
    const auto s = similarity_from_distance(d).values;
    CHECK(s(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-7));
    CHECK(s(0, 1) == 0.0f);
    CHECK(s(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-7));
    CHECK(s(1, 1) == 0.0f);
  }

  TEST_CASE("fix_length") {
    Rng rng(1);
    const ChromaSequence long_song = oracle::random_chroma(rng, 200);
    const ChromaSequence cut = fix_length(long_song);
    CHECK(cut.length() == 180);
    CHECK(cut.frames == long_song.frames.leftCols(180));
    const ChromaSequence exact = oracle::random_chroma(rng, 180);
    CHECK(fix_length(exact).frames == exact.frames);
    const ChromaSequence short_song = oracle::random_chroma(rng, 150, 0.0);
    const ChromaSequence padded = fix_length(short_song);
    CHECK(padded.length() == 180);
    CHECK(padded.frames.leftCols(150) == short_song.frames);
    CHECK(padded.frames.rightCols(30).isZero(0));
  }

  TEST_CASE("standardize") {
    CrossSimilarityMatrix c;
    c.values = SimilarityGrid::Constant(3, 3, 0.7f);
    const auto z = standardize(c);
    CHECK(z.standardized);
    CHECK(z.values.isZero(0));

    c.values.resize(2, 2);
    c.values << 0, 1, 0, 1;
    SimilarityGrid expected(2, 2);
    expected << -1, 1, -1, 1;
    CHECK(standardize(c).values.isApprox(expected, 1e-7f));

    Rng rng(3);
    const auto raw = build_raw_pair_matrix(oracle::random_chroma(rng, 120), oracle::random_chroma(rng, 190));
    CHECK_FALSE(raw.standardized);
    const auto s = standardize(raw);
    const double mean = s.values.cast<double>().mean();
    const double var = (s.values.cast<double>().array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("corpus-global standardization") {
    CrossSimilarityMatrix a, b;
    a.values = SimilarityGrid::Constant(2, 2, 0.0f);
    b.values = SimilarityGrid::Constant(2, 2, 1.0f);
    const std::vector<CrossSimilarityMatrix> both{a, b};
    const StandardizationStats stats = corpus_statistics(both);
    CHECK(stats.mean == doctest::Approx(0.5));
    CHECK(stats.stddev == doctest::Approx(0.5));
    CHECK(standardize_with(b, stats).values.isApprox(SimilarityGrid::Ones(2, 2)));
  }

  TEST_CASE("pair matrix construction") {
    Rng rng(8);
    const ChromaSequence a = oracle::random_chroma(rng, 150, 0.0, "a");
    const auto self = build_raw_pair_matrix(a, a);
    CHECK(self.values.rows() == 180);
    CHECK(self.values.diagonal().head(150).isOnes(0));
    CHECK(self.query_id == "a");

    for (int k = 0; k < 12; ++k) {
      CHECK(build_pair_matrix(a, transpose_chroma(a, k)).values == build_pair_matrix(a, a).values);
    }

    const auto big = build_pair_matrix(oracle::random_chroma(rng, 200), oracle::random_chroma(rng, 150));
    CHECK(big.values.rows() == 180);
    CHECK(big.values.cols() == 180);
    CHECK(big.standardized);
  }

  TEST_CASE("raw pair matrix matches the loop reference") {
    Rng rng(21);
    std::uniform_int_distribution<int> len(1, 240);
    for (int i = 0; i < 25; ++i) {
      const ChromaSequence a = oracle::random_chroma(rng, len(rng)), b = oracle::random_chroma(rng, len(rng));
      const auto s = build_raw_pair_matrix(a, b).values;
      const auto ref = oracle::similarity(a, b);
      double worst = 0;
      for (int l = 0; l < 180; ++l) {
        for (int m = 0; m < 180; ++m) worst = std::max(worst, std::abs(double(s(l, m)) - ref[l][m]));
      }
      CHECK(worst < 1e-6);
      CHECK(s.minCoeff() == 0.0f);
      CHECK(s.maxCoeff() <= 1.0f);
    }
  }

  TEST_CASE("identical constant songs give the all-ones grid") {
    ChromaSequence z;
    z.frames = ChromaMatrix<float>::Zero(12, 180);
    CHECK(build_raw_pair_matrix(z, z).values.isOnes(0));
  }

  TEST_CASE("XSIM round trip") {
    Rng rng(2);
    auto m = build_pair_matrix(oracle::random_chroma(rng, 100, 0.1, "q"), oracle::random_chroma(rng, 90, 0.1, "c"));
    const Bytes bytes = encode_xsim(m);
    CHECK(bytes.size() == 4 + 4 + 1 + 4 + 1 + 4 + 1 + 180 * 180 * 4);
    const auto back = decode_xsim(bytes);
    CHECK(back.values == m.values);
    CHECK(back.query_id == "q");
    CHECK(back.candidate_id == "c");
    CHECK(back.standardized);

    const auto path = std::filesystem::temp_directory_path() / "coverid_test.xsim";
    write_xsim(path, m);
    CHECK(read_xsim(path).values == m.values);
    std::filesystem::remove(path);

    Bytes bad = bytes;
    bad[1] = '?';
    CHECK_THROWS_AS(decode_xsim(bad), Error);
    m.values.resize(2, 2);
    CHECK_THROWS_AS(encode_xsim(m), Error);
  }
}
