#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coverid/nn/network.hpp"
#include "coverid/pipeline/manifest.hpp"
#include "coverid/pipeline/matrix_provider.hpp"
#include "coverid/pipeline/pairs.hpp"

namespace coverid {

struct RankedCandidate {
  std::string candidate_id;
  double likelihood = 0.0;
  int rank = 0;  // 1-based
};

struct RankingList {
  std::string query_id;
  std::vector<RankedCandidate> items;
};

// query id -> ids of its true covers among the candidates.
using GroundTruth = std::map<std::string, std::set<std::string>>;

// Cover-class softmax probability of every (query, candidate) pair, inference
// mode. Candidates are scored in batches; results do not depend on batching.
std::vector<double> cover_likelihoods(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                                      const std::string& query_id, const std::vector<std::string>& candidate_ids,
                                      pipeline::MatrixSource& source, int jobs = 1, int batch_size = 32);

// Descending likelihood, ties by ascending candidate id. Throws LengthMismatch.
RankingList rank_candidates(const std::string& query_id, const std::vector<double>& likelihoods,
                            const std::vector<std::string>& candidate_ids);

// Per-query pieces of the metrics; every ranking's query must be in `truth`
// (MissingQuery otherwise).
int hits_in_top(const RankingList& ranking, const std::set<std::string>& relevant, int n = 10);
double average_precision(const RankingList& ranking, const std::set<std::string>& relevant);
// Throws NoRelevantCandidate when no relevant item is ranked.
int first_hit_rank(const RankingList& ranking, const std::set<std::string>& relevant);

// Mean number of true covers in the top 10, averaged over queries.
double mnit10(const std::vector<RankingList>& rankings, const GroundTruth& truth);
double mean_average_precision(const std::vector<RankingList>& rankings, const GroundTruth& truth);
double mean_rank_first(const std::vector<RankingList>& rankings, const GroundTruth& truth);

struct QueryReport {
  std::string query_id;
  int first_hit_rank = 0;
  double ap = 0.0;
  int hits_top10 = 0;
};

struct EvalReport {
  double mnit10 = 0.0;
  double map = 0.0;
  double mr1 = 0.0;
  std::vector<QueryReport> queries;
  std::vector<RankingList> rankings;
};

EvalReport evaluate_rankings(const std::vector<RankingList>& rankings, const GroundTruth& truth);

// Truth for every test-query song: the other test songs of its clique.
// Throws InvalidManifest if a query has no cover in the test splits.
GroundTruth ground_truth(const pipeline::SongManifest& manifest);

// Scores every candidate of one query; must be callable concurrently.
using Scorer = std::function<std::vector<double>(const std::string& query_id,
                                                 const std::vector<std::string>& candidate_ids)>;

Scorer network_scorer(const nn::Network<float>& network, const nn::ModelParams<float>& params,
                      pipeline::MatrixSource& source);
// Likelihood 1 for true covers and 0 otherwise (or the reverse).
Scorer oracle_scorer(GroundTruth truth, bool inverted = false);

// Each test query against all other test songs (queries and dummies).
// Queries run in parallel; the report is assembled in manifest order.
EvalReport evaluate(const pipeline::SongManifest& manifest, const Scorer& scorer, int jobs = 1);

// JSON with top-level mnit10, map, mr1 and a queries array.
std::string format_report(const EvalReport& report);
// `MNIT10=<v> MAP=<v> MR1=<v>`
std::string summary_line(const EvalReport& report);

}  // namespace coverid
