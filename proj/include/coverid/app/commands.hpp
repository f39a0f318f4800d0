#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coverid/pipeline/synthetic.hpp"
#include "coverid/pipeline/training.hpp"
#include "coverid/retrieval.hpp"

namespace coverid::app {

namespace fs = std::filesystem;

struct ExtractOptions {
  fs::path input_dir;
  fs::path out_dir;
  int jobs = 1;
};

// One CHRM per readable WAV in `input_dir`; unreadable files are reported on
// `log` and skipped. Throws NoInputs when nothing was extracted.
std::size_t cmd_extract(const ExtractOptions& options, std::ostream& log);

struct SynthOptions {
  std::optional<fs::path> config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
};

pipeline::SongManifest cmd_synth(const SynthOptions& options, std::ostream& log);

struct PairsOptions {
  fs::path manifest;
  pipeline::Split split = pipeline::Split::Train;
  fs::path out_dir;
  std::uint64_t seed = 1;
};

pipeline::PairDataset cmd_pairs(const PairsOptions& options, std::ostream& log);

// `p=0.5 q=0.25,0.5`; a missing axis falls back to the configured rate.
struct DropoutGrid {
  std::vector<double> p;
  std::vector<double> q;
};
DropoutGrid parse_grid(const std::vector<std::string>& tokens, const pipeline::TrainingConfig& config);

struct TrainOptions {
  fs::path manifest;
  std::optional<fs::path> config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::vector<std::string> grid;
  // Overrides the config file, e.g. for the label-shuffled control.
  std::optional<bool> shuffle_labels;
};

struct TrainOutcome {
  pipeline::TrainingConfig config;
  pipeline::TrainingResult result;
  std::vector<pipeline::GridCell> grid;
  fs::path model_path;
  fs::path history_path;
};

// Writes model.cnnw and history.csv (plus grid.csv when grid-searching) and
// keeps its matrix cache under out_dir/cache.
TrainOutcome cmd_train(const TrainOptions& options, std::ostream& log);

struct EvaluateOptions {
  fs::path manifest;
  std::optional<fs::path> model;
  fs::path out_dir;
  int jobs = 1;
  std::string scorer = "cnn";  // cnn | oracle
};

// Writes report.json and prints `MNIT10=.. MAP=.. MR1=..`.
EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

struct RankOptions {
  fs::path model;
  fs::path query;
  fs::path candidates_dir;
  int top_n = 10;
  int jobs = 1;
};

// Prints `rank<TAB>candidate_id<TAB>likelihood` for the top_n candidates.
RankingList cmd_rank(const RankOptions& options, std::ostream& out);

// Full command line (argv[0] included). Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coverid::app
