#include "coverid/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "coverid/audio.hpp"
#include "coverid/binary_io.hpp"
#include "coverid/chroma.hpp"
#include "coverid/nn/model_io.hpp"
#include "coverid/parallel.hpp"

namespace coverid::app {

namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::NoInputs, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string got = e.path().extension().string();
    std::transform(got.begin(), got.end(), got.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (got == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

pipeline::SongManifest load_manifest(const fs::path& path) {
  pipeline::SongManifest manifest = pipeline::read_manifest(path);
  pipeline::validate_manifest(manifest);
  return manifest;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

std::size_t cmd_extract(const ExtractOptions& options, std::ostream& log) {
  const auto inputs = files_with_extension(options.input_dir, ".wav");
  if (inputs.empty()) throw Error(ErrorCode::NoInputs, "no .wav files in " + options.input_dir.string());
  fs::create_directories(options.out_dir);

  std::vector<std::string> failures(inputs.size());
  parallel_for(options.jobs, static_cast<std::ptrdiff_t>(inputs.size()), [&](int, std::ptrdiff_t i) {
    const auto& path = inputs[static_cast<std::size_t>(i)];
    try {
      const AudioClip clip = resample_to_reference(load_audio_wav(path));
      const ChromaSequence chroma = compute_chroma(clip, path.stem().string());
      write_chroma(options.out_dir / (path.stem().string() + ".chrm"), chroma);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  });

  std::size_t written = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (failures[i].empty()) {
      ++written;
    } else {
      log << "warning: skipped " << inputs[i].filename().string() << ": " << failures[i] << "\n";
    }
  }
  if (written == 0) throw Error(ErrorCode::NoInputs, "every input failed to decode");
  log << "extracted " << written << " of " << inputs.size() << " files\n";
  return written;
}

pipeline::SongManifest cmd_synth(const SynthOptions& options, std::ostream& log) {
  pipeline::SyntheticConfig config;
  if (options.config) config = pipeline::synthetic_config_from(pipeline::read_key_values(*options.config));
  if (options.seed) config.seed = *options.seed;
  const auto corpus = pipeline::generate_synthetic_corpus(config);
  auto manifest = pipeline::write_synthetic_corpus(corpus, options.out_dir);
  log << "wrote " << manifest.entries.size() << " songs (" << config.cliques << " cliques x "
      << config.versions_per_clique << " versions + " << config.dummies << " dummies) to "
      << options.out_dir.string() << "\n";
  return manifest;
}

pipeline::PairDataset cmd_pairs(const PairsOptions& options, std::ostream& log) {
  const auto manifest = load_manifest(options.manifest);
  Rng rng = make_stream(options.seed, streams::kSampling);
  auto pairs = pipeline::build_pairs(manifest, options.split, rng);
  fs::create_directories(options.out_dir);
  const fs::path path = options.out_dir / (std::string("pairs-") + pipeline::to_string(options.split) + ".csv");
  write_text_file(path, pipeline::format_pairs(pairs));
  log << "wrote " << pairs.cover_count() << " cover and " << pairs.non_cover_count() << " non-cover pairs to "
      << path.string() << "\n";
  return pairs;
}

DropoutGrid parse_grid(const std::vector<std::string>& tokens, const pipeline::TrainingConfig& config) {
  DropoutGrid grid;
  for (const auto& token : tokens) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "grid entry '" + token + "' lacks '='");
    const std::string key = token.substr(0, eq);
    std::vector<double>* axis = key == "p" ? &grid.p : key == "q" ? &grid.q : nullptr;
    if (!axis) throw Error(ErrorCode::InvalidConfig, "grid axis must be p or q, got '" + key + "'");
    if (!axis->empty()) throw Error(ErrorCode::InvalidConfig, "grid axis " + key + " given twice");
    std::stringstream list(token.substr(eq + 1));
    for (std::string item; std::getline(list, item, ',');) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size()) throw Error(ErrorCode::InvalidConfig, "bad grid value '" + item + "'");
      if (v < 0.0 || v >= 1.0) throw Error(ErrorCode::InvalidConfig, "dropout rates must lie in [0, 1)");
      axis->push_back(v);
    }
    if (axis->empty()) throw Error(ErrorCode::InvalidConfig, "grid axis " + key + " is empty");
  }
  if (grid.p.empty()) grid.p = {config.dropout_p};
  if (grid.q.empty()) grid.q = {config.dropout_q};
  return grid;
}

TrainOutcome cmd_train(const TrainOptions& options, std::ostream& log) {
  TrainOutcome outcome;
  auto& config = outcome.config;
  if (options.config) config = pipeline::training_config_from(pipeline::read_key_values(*options.config));
  if (options.seed) config.seed = *options.seed;
  if (options.jobs) config.jobs = *options.jobs;
  if (options.shuffle_labels) config.shuffle_labels = *options.shuffle_labels;
  pipeline::validate(config);
  const std::optional<DropoutGrid> grid =
      options.grid.empty() ? std::nullopt : std::optional<DropoutGrid>(parse_grid(options.grid, config));

  const auto manifest = load_manifest(options.manifest);
  if (!manifest.has_split(pipeline::Split::Train)) throw Error(ErrorCode::InvalidManifest, "manifest has no train split");
  if (!manifest.has_split(pipeline::Split::Validation)) {
    throw Error(ErrorCode::InvalidManifest, "manifest has no validation split");
  }

  Rng sampling = make_stream(config.seed, streams::kSampling);
  const auto train_pairs = pipeline::build_pairs(manifest, pipeline::Split::Train, sampling);
  const auto val_pairs = pipeline::build_pairs(manifest, pipeline::Split::Validation, sampling);

  fs::create_directories(options.out_dir);
  auto provider = pipeline::PairMatrixProvider::from_manifest(manifest, options.out_dir / "cache");
  const auto train_set = pipeline::materialize(train_pairs, *provider, config.jobs);
  const auto val_set = pipeline::materialize(val_pairs, *provider, config.jobs);
  log << "training on " << train_set.size() << " pairs, validating on " << val_set.size() << "\n";

  if (grid) {
    auto search = pipeline::grid_search_dropout(config, grid->p, grid->q, train_set, val_set);
    for (const auto& cell : search.cells) {
      log << "grid p=" << cell.dropout_p << " q=" << cell.dropout_q << " val_accuracy=" << cell.val_accuracy << "\n";
    }
    std::string csv = "dropout_p,dropout_q,val_accuracy\n";
    for (const auto& cell : search.cells) {
      csv += pipeline::format_number(cell.dropout_p) + "," + pipeline::format_number(cell.dropout_q) + "," +
             pipeline::format_number(cell.val_accuracy) + "\n";
    }
    write_text_file(options.out_dir / "grid.csv", csv);
    config.dropout_p = search.best.dropout_p;
    config.dropout_q = search.best.dropout_q;
    outcome.grid = std::move(search.cells);
    outcome.result = std::move(search.model);
  } else {
    outcome.result = pipeline::train(config, train_set, val_set);
  }

  outcome.model_path = options.out_dir / "model.cnnw";
  outcome.history_path = options.out_dir / "history.csv";
  nn::save_model(outcome.model_path, outcome.result.spec, outcome.result.params);
  write_text_file(outcome.history_path, pipeline::format_history(outcome.result.history));
  log << "dropout p=" << config.dropout_p << " q=" << config.dropout_q << " epochs=" << outcome.result.history.size()
      << " best_epoch=" << outcome.result.best_epoch
      << " val_accuracy=" << fmt("%.4f", outcome.result.best_val_accuracy) << "\n";
  return outcome;
}

EvalReport cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  const auto manifest = load_manifest(options.manifest);
  EvalReport report;
  if (options.scorer == "oracle") {
    report = evaluate(manifest, oracle_scorer(ground_truth(manifest)), options.jobs);
  } else if (options.scorer == "cnn") {
    if (!options.model) throw Error(ErrorCode::InvalidArgument, "--model is required with the cnn scorer");
    const nn::LoadedModel model = nn::load_model(*options.model);
    const nn::Network<float> network(model.spec);
    fs::create_directories(options.out_dir);
    auto provider = pipeline::PairMatrixProvider::from_manifest(manifest, options.out_dir / "cache");
    report = evaluate(manifest, network_scorer(network, model.params, *provider), options.jobs);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scorer '" + options.scorer + "'");
  }
  fs::create_directories(options.out_dir);
  write_text_file(options.out_dir / "report.json", format_report(report));
  log << summary_line(report) << "\n";
  return report;
}

RankingList cmd_rank(const RankOptions& options, std::ostream& out) {
  if (options.top_n < 1) throw Error(ErrorCode::InvalidArgument, "--top-n must be >= 1");
  const nn::LoadedModel model = nn::load_model(options.model);
  const nn::Network<float> network(model.spec);

  pipeline::PairMatrixProvider provider;
  ChromaSequence query = read_chroma(options.query);
  const std::string query_id = query.song_id;
  provider.add_chroma(std::move(query));
  std::vector<std::string> candidates;
  for (const auto& path : files_with_extension(options.candidates_dir, ".chrm")) {
    const std::string id = path.stem().string();
    if (id == query_id) continue;
    provider.add_file(id, path);
    candidates.push_back(id);
  }
  if (candidates.empty()) throw Error(ErrorCode::NoInputs, "no candidate .chrm files");

  const auto likelihoods = cover_likelihoods(network, model.params, query_id, candidates, provider, options.jobs);
  RankingList ranking = rank_candidates(query_id, likelihoods, candidates);
  const auto shown = std::min<std::size_t>(ranking.items.size(), static_cast<std::size_t>(options.top_n));
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& item = ranking.items[i];
    out << item.rank << '\t' << item.candidate_id << '\t' << fmt("%.9g", item.likelihood) << '\n';
  }
  return ranking;
}

namespace {

void add_seed(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&seed](const std::uint64_t& v) { seed = v; }, "Master seed (overrides the config file)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cover-song identification with cross-similarity CNNs", "coverid"};
  app.require_subcommand(1);

  ExtractOptions extract;
  auto* c_extract = app.add_subcommand("extract", "Decode WAV files into CHRM chroma files");
  c_extract->add_option("--input", extract.input_dir, "Directory of .wav files")->required();
  c_extract->add_option("--out", extract.out_dir, "Output directory")->required();
  c_extract->add_option("--jobs", extract.jobs, "Worker threads")->check(CLI::PositiveNumber);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic cover corpus");
  c_synth->add_option_function<std::string>(
      "--config", [&synth](const std::string& v) { synth.config = v; }, "Synthetic corpus config (key = value)");
  c_synth->add_option("--out", synth.out_dir, "Output directory")->required();
  add_seed(c_synth, synth.seed);

  PairsOptions pairs;
  std::string pairs_split = "train";
  auto* c_pairs = app.add_subcommand("pairs", "Sample labeled cover / non-cover pairs of one split");
  c_pairs->add_option("--manifest", pairs.manifest, "Song manifest CSV")->required();
  c_pairs->add_option("--split", pairs_split, "train | validation | test-query | test-dummy");
  c_pairs->add_option("--out", pairs.out_dir, "Output directory")->required();
  c_pairs->add_option("--seed", pairs.seed, "Master seed");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train the CNN and write model.cnnw + history.csv");
  c_train->add_option("--manifest", train.manifest, "Song manifest CSV")->required();
  c_train->add_option_function<std::string>(
      "--config", [&train](const std::string& v) { train.config = v; }, "Training config (key = value)");
  c_train->add_option("--out", train.out_dir, "Output directory")->required();
  add_seed(c_train, train.seed);
  c_train->add_option_function<int>(
      "--jobs", [&train](const int& v) { train.jobs = v; }, "Worker threads")->check(CLI::PositiveNumber);
  c_train->add_option("--grid", train.grid, "Dropout grid, e.g. p=0.5 q=0.25,0.5")->expected(1, 2);

  EvaluateOptions evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Rank every test query and write report.json");
  c_eval->add_option("--manifest", evaluate.manifest, "Song manifest CSV")->required();
  c_eval->add_option_function<std::string>(
      "--model", [&evaluate](const std::string& v) { evaluate.model = v; }, "CNNW model file");
  c_eval->add_option("--out", evaluate.out_dir, "Output directory")->required();
  c_eval->add_option("--jobs", evaluate.jobs, "Worker threads")->check(CLI::PositiveNumber);
  c_eval->add_option("--scorer", evaluate.scorer, "cnn | oracle")->check(CLI::IsMember({"cnn", "oracle"}));

  RankOptions rank;
  auto* c_rank = app.add_subcommand("rank", "Rank candidate songs against one query");
  c_rank->add_option("--model", rank.model, "CNNW model file")->required();
  c_rank->add_option("--query", rank.query, "Query CHRM file")->required();
  c_rank->add_option("--candidates", rank.candidates_dir, "Directory of candidate CHRM files")->required();
  c_rank->add_option("--top-n", rank.top_n, "Number of lines to print")->check(CLI::PositiveNumber);
  c_rank->add_option("--jobs", rank.jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (c_extract->parsed()) {
      cmd_extract(extract, out);
    } else if (c_synth->parsed()) {
      cmd_synth(synth, out);
    } else if (c_pairs->parsed()) {
      pairs.split = pipeline::parse_split(pairs_split);
      cmd_pairs(pairs, out);
    } else if (c_train->parsed()) {
      cmd_train(train, out);
    } else if (c_eval->parsed()) {
      cmd_evaluate(evaluate, out);
    } else if (c_rank->parsed()) {
      cmd_rank(rank, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace coverid::app
