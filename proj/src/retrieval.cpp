#include "coverid/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "coverid/parallel.hpp"

namespace coverid {

std::vector<double> cover_likelihoods(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                                      const std::string& query_id, const std::vector<std::string>& candidate_ids,
                                      pipeline::MatrixSource& source, int jobs, int batch_size) {
  std::vector<double> out;
  out.reserve(candidate_ids.size());
  const auto step = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t start = 0; start < candidate_ids.size(); start += step) {
    const std::size_t n = std::min(step, candidate_ids.size() - start);
    nn::Tensor<float> batch({static_cast<nn::Index>(n), 1, kMatrixFrames, kMatrixFrames});
    for (std::size_t i = 0; i < n; ++i) {
      const CrossSimilarityMatrix m = source.matrix(query_id, candidate_ids[start + i]);
      if (m.values.size() != batch.slice_size()) throw Error(ErrorCode::ShapeMismatch, "pair matrix is not 180x180");
      batch.slice(static_cast<nn::Index>(i)) = Eigen::Map<const nn::Vector<float>>(m.values.data(), m.values.size());
    }
    const nn::Tensor<float> probs = network.forward(params, batch, nn::Mode::Infer, nullptr, nullptr, jobs);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(probs[static_cast<nn::Index>(i) * probs.dim(1) + pipeline::kCover]);
    }
  }
  return out;
}

RankingList rank_candidates(const std::string& query_id, const std::vector<double>& likelihoods,
                            const std::vector<std::string>& candidate_ids) {
  if (likelihoods.size() != candidate_ids.size()) {
    throw Error(ErrorCode::LengthMismatch, "likelihood and candidate counts differ");
  }
  std::vector<std::size_t> order(likelihoods.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (likelihoods[a] != likelihoods[b]) return likelihoods[a] > likelihoods[b];
    return candidate_ids[a] < candidate_ids[b];
  });
  RankingList out{query_id, {}};
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.items.push_back({candidate_ids[order[r]], likelihoods[order[r]], static_cast<int>(r + 1)});
  }
  return out;
}

int hits_in_top(const RankingList& ranking, const std::set<std::string>& relevant, int n) {
  int hits = 0;
  for (const auto& item : ranking.items) {
    if (item.rank > n) break;
    hits += static_cast<int>(relevant.count(item.candidate_id));
  }
  return hits;
}

double average_precision(const RankingList& ranking, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::NoRelevantCandidate, "query " + ranking.query_id + " has no covers");
  double sum = 0.0;
  int hits = 0;
  for (const auto& item : ranking.items) {
    if (relevant.count(item.candidate_id)) {
      ++hits;
      sum += static_cast<double>(hits) / item.rank;
    }
  }
  return sum / static_cast<double>(relevant.size());
}

int first_hit_rank(const RankingList& ranking, const std::set<std::string>& relevant) {
  for (const auto& item : ranking.items) {
    if (relevant.count(item.candidate_id)) return item.rank;
  }
  throw Error(ErrorCode::NoRelevantCandidate, "no cover of " + ranking.query_id + " among its candidates");
}

namespace {

const std::set<std::string>& truth_of(const GroundTruth& truth, const std::string& query) {
  const auto it = truth.find(query);
  if (it == truth.end()) throw Error(ErrorCode::MissingQuery, "no ground truth for query " + query);
  return it->second;
}

template <typename PerQuery>
double mean_over(const std::vector<RankingList>& rankings, const GroundTruth& truth, PerQuery per_query) {
  if (rankings.empty()) throw Error(ErrorCode::MissingQuery, "no rankings to evaluate");
  double sum = 0.0;
  for (const auto& r : rankings) sum += per_query(r, truth_of(truth, r.query_id));
  return sum / static_cast<double>(rankings.size());
}

}  // namespace

double mnit10(const std::vector<RankingList>& rankings, const GroundTruth& truth) {
  return mean_over(rankings, truth, [](const RankingList& r, const auto& rel) { return double(hits_in_top(r, rel)); });
}

double mean_average_precision(const std::vector<RankingList>& rankings, const GroundTruth& truth) {
  return mean_over(rankings, truth, [](const RankingList& r, const auto& rel) { return average_precision(r, rel); });
}

double mean_rank_first(const std::vector<RankingList>& rankings, const GroundTruth& truth) {
  return mean_over(rankings, truth,
                   [](const RankingList& r, const auto& rel) { return double(first_hit_rank(r, rel)); });
}

EvalReport evaluate_rankings(const std::vector<RankingList>& rankings, const GroundTruth& truth) {
  EvalReport report;
  report.mnit10 = mnit10(rankings, truth);
  report.map = mean_average_precision(rankings, truth);
  report.mr1 = mean_rank_first(rankings, truth);
  for (const auto& r : rankings) {
    const auto& rel = truth_of(truth, r.query_id);
    report.queries.push_back({r.query_id, first_hit_rank(r, rel), average_precision(r, rel), hits_in_top(r, rel)});
  }
  report.rankings = rankings;
  return report;
}

namespace {

std::vector<const pipeline::SongEntry*> test_songs(const pipeline::SongManifest& manifest) {
  std::vector<const pipeline::SongEntry*> out;
  for (const auto& e : manifest.entries) {
    if (e.split == pipeline::Split::TestQuery || e.split == pipeline::Split::TestDummy) out.push_back(&e);
  }
  return out;
}

}  // namespace

GroundTruth ground_truth(const pipeline::SongManifest& manifest) {
  const auto tests = test_songs(manifest);
  GroundTruth truth;
  for (const auto* q : tests) {
    if (q->split != pipeline::Split::TestQuery) continue;
    auto& rel = truth[q->song_id];
    for (const auto* c : tests) {
      if (c != q && c->clique_id == q->clique_id) rel.insert(c->song_id);
    }
    if (rel.empty()) throw Error(ErrorCode::InvalidManifest, "test query " + q->song_id + " has no covers");
  }
  return truth;
}

Scorer network_scorer(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                      pipeline::MatrixSource& source) {
  return [&network, &params, &source](const std::string& query, const std::vector<std::string>& candidates) {
    return cover_likelihoods(network, params, query, candidates, source);
  };
}

Scorer oracle_scorer(GroundTruth truth, bool inverted) {
  return [truth = std::move(truth), inverted](const std::string& query, const std::vector<std::string>& candidates) {
    const auto& rel = truth_of(truth, query);
    std::vector<double> out;
    for (const auto& c : candidates) out.push_back(rel.count(c) != inverted ? 1.0 : 0.0);
    return out;
  };
}

EvalReport evaluate(const pipeline::SongManifest& manifest, const Scorer& scorer, int jobs) {
  if (!manifest.has_split(pipeline::Split::TestQuery)) {
    throw Error(ErrorCode::InvalidManifest, "manifest has no test-query songs");
  }
  const GroundTruth truth = ground_truth(manifest);
  const auto tests = test_songs(manifest);
  const auto queries = manifest.in_split(pipeline::Split::TestQuery);

  std::vector<RankingList> rankings(queries.size());
  parallel_for(jobs, static_cast<std::ptrdiff_t>(queries.size()), [&](int, std::ptrdiff_t i) {
    const auto* q = queries[static_cast<std::size_t>(i)];
    std::vector<std::string> candidates;
    for (const auto* c : tests) {
      if (c != q) candidates.push_back(c->song_id);
    }
    rankings[static_cast<std::size_t>(i)] = rank_candidates(q->song_id, scorer(q->song_id, candidates), candidates);
  });
  return evaluate_rankings(rankings, truth);
}

std::string format_report(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mnit10"] = report.mnit10;
  j["map"] = report.map;
  j["mr1"] = report.mr1;
  j["queries"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.queries.size(); ++i) {
    const auto& q = report.queries[i];
    nlohmann::ordered_json entry;
    entry["query_id"] = q.query_id;
    entry["first_hit_rank"] = q.first_hit_rank;
    entry["ap"] = q.ap;
    entry["hits_top10"] = q.hits_top10;
    if (i < report.rankings.size()) {
      auto& ranking = entry["ranking"] = nlohmann::ordered_json::array();
      for (const auto& item : report.rankings[i].items) {
        ranking.push_back({{"rank", item.rank}, {"candidate_id", item.candidate_id}, {"likelihood", item.likelihood}});
      }
    }
    j["queries"].push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

std::string summary_line(const EvalReport& report) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "MNIT10=%.4f MAP=%.4f MR1=%.4f", report.mnit10, report.map, report.mr1);
  return buf;
}

}  // namespace coverid
