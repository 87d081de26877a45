#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "mvad/config.hpp"
#include "mvad/errors.hpp"
#include "mvad/graph.hpp"
#include "mvad/inject.hpp"
#include "mvad/io.hpp"
#include "mvad/metrics.hpp"
#include "mvad/model.hpp"
#include "mvad/spectral.hpp"
#include "mvad/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigCli {
  std::string config_path;
  // Flag overrides in command-line order; applied after the file so they win.
  std::vector<std::pair<std::string, std::string>> overrides;

  mvad::RunConfig resolve() const {
    mvad::RunConfig config;
    if (!config_path.empty()) config = mvad::load_run_config(config_path);
    for (const auto& [key, value] : overrides)
      mvad::apply_config_key(config, key, value, "--" + key);
    return config;
  }
};

void add_config_flags(CLI::App* cmd, ConfigCli& cli) {
  cmd->add_option("-c,--config", cli.config_path, "settings file (key = value lines)");
  static const std::pair<const char*, const char*> keys[] = {
      {"manifest", "--manifest"},
      {"out_dir", "--out-dir"},
      {"seed", "--seed"},
      {"epochs", "--epochs"},
      {"learning_rate", "--learning-rate"},
      {"epsilon", "--epsilon"},
      {"embed_dim", "--embed-dim"},
      {"attn_dim", "--attn-dim"},
      {"layers", "--layers"},
      {"fusion", "--fusion"},
      {"encoder", "--encoder"},
      {"activation", "--activation"},
      {"block_rows", "--block-rows"},
      {"clique_size", "--clique-size"},
      {"n_cliques", "--n-cliques"},
      {"n_attr_anomalies", "--n-attr-anomalies"},
      {"candidate_pool", "--candidate-pool"},
      {"target_views", "--target-views"},
      {"k_list", "--k-list"},
      {"epsilon_sweep", "--epsilon-sweep"},
  };
  for (const auto& [key, flag] : keys) {
    std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&cli, k](const std::string& v) { cli.overrides.emplace_back(k, v); },
        "override config key '" + k + "'");
  }
}

std::string out_path(const mvad::RunConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

void ensure_out_dir(const mvad::RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec)
    throw mvad::IoError("cannot create output directory '" + config.out_dir +
                        "': " + ec.message());
}

void note_written(const std::string& path) { std::cout << "wrote " << path << "\n"; }

mvad::MultiViewNetwork load_input(const mvad::RunConfig& config) {
  if (config.manifest.empty())
    throw mvad::ValidationError("no dataset manifest given (config key 'manifest')");
  return mvad::load_network(config.manifest);
}

std::vector<unsigned char> labels_from_ids(const std::vector<std::size_t>& ids, std::size_t n) {
  std::vector<unsigned char> labels(n, 0);
  for (std::size_t id : ids) labels[id] = 1;
  return labels;
}

int cmd_inject(const ConfigCli& cli) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  mvad::MultiViewNetwork network = load_input(config);
  config.injection.validate(network);

  auto [perturbed, truth] = mvad::inject(network, config.injection);
  ensure_out_dir(config);
  std::string manifest = mvad::save_network(config.out_dir, perturbed);
  std::string truth_path = out_path(config, "ground_truth.txt");
  mvad::save_ground_truth(truth_path, truth.anomalous_ids());
  note_written(manifest);
  note_written(truth_path);
  return 0;
}

int cmd_train(const ConfigCli& cli) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  mvad::MultiViewNetwork network = load_input(config);
  config.hp.K = network.n_views();
  config.hp.validate();
  ensure_out_dir(config);

  mvad::TrainReport report;
  const std::string report_path = out_path(config, "train_report.json");
  mvad::ModelParams params = [&] {
    try {
      return mvad::train(network, config.hp, report);
    } catch (const mvad::NumericError&) {
      // Keep the per-epoch record of the partial run next to the failure.
      mvad::save_train_report(report_path, report);
      note_written(report_path);
      throw;
    }
  }();

  const std::string ckpt_path = out_path(config, "checkpoint.txt");
  mvad::save_checkpoint(ckpt_path, params, config.hp, network.n, network.d);
  mvad::save_train_report(report_path, report);
  note_written(ckpt_path);
  note_written(report_path);
  return 0;
}

int cmd_score(const ConfigCli& cli, const std::string& checkpoint_flag) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  mvad::MultiViewNetwork network = load_input(config);
  const std::string ckpt_path =
      checkpoint_flag.empty() ? out_path(config, "checkpoint.txt") : checkpoint_flag;
  mvad::Checkpoint ckpt = mvad::load_checkpoint(ckpt_path);
  if (ckpt.n != network.n || ckpt.d != network.d || ckpt.hp.K != network.n_views()) {
    throw mvad::ValidationError(
        "checkpoint was trained on a different dataset shape: checkpoint n=" +
        std::to_string(ckpt.n) + " d=" + std::to_string(ckpt.d) +
        " K=" + std::to_string(ckpt.hp.K) + ", dataset n=" + std::to_string(network.n) +
        " d=" + std::to_string(network.d) + " K=" + std::to_string(network.n_views()));
  }

  mvad::EncoderInputs inputs = mvad::prepare_inputs(network, ckpt.hp);
  std::vector<double> scores = mvad::anomaly_scores(network, inputs, ckpt.params, ckpt.hp);
  ensure_out_dir(config);
  const std::string scores_path = out_path(config, "scores.csv");
  mvad::save_scores_csv(scores_path, scores);
  note_written(scores_path);
  return 0;
}

int cmd_eval(const ConfigCli& cli, const std::string& scores_flag,
             const std::string& truth_flag) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  const std::string scores_path =
      scores_flag.empty() ? out_path(config, "scores.csv") : scores_flag;
  const std::string truth_path =
      truth_flag.empty() ? out_path(config, "ground_truth.txt") : truth_flag;

  std::vector<mvad::ScoreRow> rows = mvad::load_scores_csv(scores_path);
  std::vector<double> scores(rows.size());
  for (const auto& row : rows) scores[row.node_id] = row.score;
  std::vector<std::size_t> ids = mvad::load_ground_truth(truth_path, scores.size());
  std::vector<unsigned char> labels = labels_from_ids(ids, scores.size());

  mvad::MetricsReport report = mvad::evaluate(scores, labels, config.k_list);
  mvad::AucResult auc = mvad::auc_roc(scores, labels);
  ensure_out_dir(config);
  const std::string metrics_path = out_path(config, "metrics.json");
  const std::string roc_path = out_path(config, "roc.tsv");
  mvad::save_metrics_json(metrics_path, report);
  mvad::save_roc_tsv(roc_path, auc.roc);
  note_written(metrics_path);
  note_written(roc_path);
  return 0;
}

int cmd_spectral(const ConfigCli& cli, const std::string& view_name, std::size_t num_top,
                 int signal_column) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  mvad::MultiViewNetwork network = load_input(config);
  const mvad::ViewGraph& view = network.view(view_name);

  std::vector<double> signal;
  const std::vector<double>* signal_ptr = nullptr;
  if (signal_column >= 0) {
    if (static_cast<std::size_t>(signal_column) >= network.d)
      throw mvad::ValidationError("signal column " + std::to_string(signal_column) +
                                  " out of range for d = " + std::to_string(network.d));
    signal.resize(network.n);
    for (std::size_t i = 0; i < network.n; ++i)
      signal[i] = network.attributes(i, static_cast<std::size_t>(signal_column));
    signal_ptr = &signal;
  }

  mvad::SpectrumReport report = mvad::spectrum(view, config.hp.L, num_top, signal_ptr);
  ensure_out_dir(config);
  const std::string tsv_path = out_path(config, "spectrum_" + view_name + ".tsv");
  mvad::save_spectrum_tsv(tsv_path, report);
  note_written(tsv_path);
  return 0;
}

int cmd_sweep_epsilon(const ConfigCli& cli, const std::string& truth_flag) {
  mvad::RunConfig config = cli.resolve();
  config.validate();
  mvad::MultiViewNetwork network = load_input(config);
  const std::string truth_path =
      truth_flag.empty() ? out_path(config, "ground_truth.txt") : truth_flag;
  std::vector<std::size_t> ids = mvad::load_ground_truth(truth_path, network.n);
  std::vector<unsigned char> labels = labels_from_ids(ids, network.n);

  config.hp.K = network.n_views();
  config.hp.validate();

  json records = json::array();
  for (double eps : config.epsilon_sweep) {
    mvad::HyperParams hp = config.hp;
    hp.epsilon = eps;
    mvad::TrainReport report;
    mvad::ModelParams params = mvad::train(network, hp, report);
    mvad::EncoderInputs inputs = mvad::prepare_inputs(network, hp);
    std::vector<double> scores = mvad::anomaly_scores(network, inputs, params, hp);
    mvad::MetricsReport metrics = mvad::evaluate(scores, labels, config.k_list);

    json rec;
    rec["epsilon"] = eps;
    rec["auc"] = metrics.auc;
    json acc = json::object();
    for (const auto& [k, value] : metrics.accuracy) acc[std::to_string(k)] = value;
    rec["accuracy_at_k"] = acc;
    rec["final_loss_total"] = report.epochs.empty() ? 0.0 : report.epochs.back().loss_total;
    records.push_back(rec);
  }

  ensure_out_dir(config);
  const std::string sweep_path = out_path(config, "sweep.json");
  mvad::write_text_file(sweep_path, records.dump(2) + "\n");
  note_written(sweep_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view anomaly detection pipeline"};
  app.require_subcommand(1);

  ConfigCli inject_cli, train_cli, score_cli, eval_cli, spectral_cli, sweep_cli;

  CLI::App* inject = app.add_subcommand("inject", "plant anomalies and write the perturbed dataset");
  add_config_flags(inject, inject_cli);

  CLI::App* train = app.add_subcommand("train", "fit the model, write checkpoint and report");
  add_config_flags(train, train_cli);

  CLI::App* score = app.add_subcommand("score", "score nodes with a trained checkpoint");
  add_config_flags(score, score_cli);
  std::string checkpoint_flag;
  score->add_option("--checkpoint", checkpoint_flag, "checkpoint path (default <out_dir>/checkpoint.txt)");

  CLI::App* eval = app.add_subcommand("eval", "compute Accuracy@K, AUC and the ROC curve");
  add_config_flags(eval, eval_cli);
  std::string scores_flag, eval_truth_flag;
  eval->add_option("--scores", scores_flag, "scores CSV (default <out_dir>/scores.csv)");
  eval->add_option("--ground-truth", eval_truth_flag,
                   "ground truth file (default <out_dir>/ground_truth.txt)");

  CLI::App* spectral = app.add_subcommand("spectral", "write a view's frequency spectrum TSV");
  add_config_flags(spectral, spectral_cli);
  std::string view_name;
  std::size_t num_top = 0;
  int signal_column = -1;
  spectral->add_option("view", view_name, "view name")->required();
  spectral->add_option("--num-top", num_top,
                       "extreme frequencies per end for large graphs (0 = auto)");
  spectral->add_option("--signal-column", signal_column,
                       "attribute column to analyze as a graph signal (-1 = none)");

  CLI::App* sweep = app.add_subcommand("sweep-epsilon", "retrain across the epsilon sweep list");
  add_config_flags(sweep, sweep_cli);
  std::string sweep_truth_flag;
  sweep->add_option("--ground-truth", sweep_truth_flag,
                    "ground truth file (default <out_dir>/ground_truth.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (inject->parsed()) return cmd_inject(inject_cli);
    if (train->parsed()) return cmd_train(train_cli);
    if (score->parsed()) return cmd_score(score_cli, checkpoint_flag);
    if (eval->parsed()) return cmd_eval(eval_cli, scores_flag, eval_truth_flag);
    if (spectral->parsed()) return cmd_spectral(spectral_cli, view_name, num_top, signal_column);
    if (sweep->parsed()) return cmd_sweep_epsilon(sweep_cli, sweep_truth_flag);
  } catch (const mvad::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mvad::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const mvad::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
