#include "clef/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "clef/counterfactual.hpp"
#include "clef/data/synthetic.hpp"
#include "clef/data/tumor.hpp"
#include "clef/errors.hpp"
#include "clef/evaluation.hpp"
#include "clef/io.hpp"
#include "clef/service.hpp"
#include "clef/training.hpp"
#include "clef/var.hpp"

namespace clef::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string log_level = "info";
  std::string format = "json";
  std::string out;
};

struct DatagenOptions {
  std::string out_dir;
  // synthetic
  data::GeneratorConfig gen;
  bool counterfactual = false;
  // tumor
  data::TumorSimConfig tumor;
};

struct TrainOptions {
  std::string data;
  std::string out;
  std::string kind = "clef";
  std::string curve;
  ModelConfig model;
  std::string encoder = "recurrent";
  TrainConfig train;
  // counterfactual outcome model
  cf::OutcomeConfig outcome;
  std::string head = "clef";
  std::string balancing = "none";
  cf::CfTrainConfig cf_train;
};

struct EvalOptions {
  std::string protocol;
  std::string checkpoint;
  std::string baseline;
  std::size_t var_order = 1;
  std::string data;
  std::string split = "test";
  std::size_t horizon = 10;
  std::size_t tau_max = 6;
  std::string futures = "single-sliding";
  std::string event = "chemo+radio";
  std::size_t per_origin = 2;
};

struct GenerateOptions {
  std::string checkpoint;
  std::string data;
  std::string trajectory;
  std::size_t history_steps = 0;
  std::size_t steps = service::kDefaultSteps;
  std::vector<std::string> conditions;
  std::string edit;
  bool compare_observed = false;
};

struct ServeOptions {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = service::kDefaultPort;
};

bool is_validation_error(const Error& e) {
  return dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const ShapeMismatch*>(&e) || dynamic_cast<const InvalidHorizon*>(&e) ||
         dynamic_cast<const InvalidIntervention*>(&e) || dynamic_cast<const UnknownCondition*>(&e) ||
         dynamic_cast<const DataLeakage*>(&e) || dynamic_cast<const NonInvertibleValue*>(&e);
}

/// A directory holding train/val/test files, or a single dataset file.
std::string split_path(const std::string& data, const std::string& split) {
  if (fs::is_directory(data)) return (fs::path(data) / (split + ".jsonl")).string();
  return data;
}

io::DatasetFile load_split(const std::string& data, const std::string& split) {
  const std::string path = split_path(data, split);
  if (!fs::exists(path)) throw InvalidArgument("dataset file '" + path + "' does not exist");
  std::set<std::string> siblings;
  if (fs::is_directory(data)) {
    for (const char* other : {"train", "val", "test"}) {
      const auto p = fs::path(data) / (std::string(other) + ".jsonl");
      if (other != split && fs::exists(p)) siblings.merge(io::dataset_ids(p.string()));
    }
  }
  auto file = io::read_dataset_file(path, siblings);
  spdlog::info("read {} trajectories from {}", file.trajectories.size(), path);
  return file;
}

void emit(const std::string& text, const Common& common, std::ostream& out) {
  if (common.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(common.out, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open '" + common.out + "' for writing");
  f << text;
  spdlog::info("wrote {}", common.out);
}

Json header_for(const std::string& split, const std::vector<std::string>& names) {
  return Json{{"split", split}, {"variables", names}};
}

std::vector<std::string> default_names(std::size_t v) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < v; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

// ---- datagen ----------------------------------------------------------------

void run_datagen_synthetic(DatagenOptions& o, const Common& common) {
  o.gen.seed = common.seed;
  o.gen.validate();
  const auto all = o.counterfactual ? data::generate_cf_dataset(o.gen) : data::generate_dataset(o.gen);
  const auto split = data::split_dataset(all, {}, common.seed, o.counterfactual);
  fs::create_directories(o.out_dir);
  const auto names = default_names(o.gen.variables);
  const std::pair<const char*, const std::vector<Trajectory>*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, trajs] : parts) {
    Json h = header_for(name, names);
    h["generator"] = io::to_json(o.gen);
    h["counterfactual"] = o.counterfactual;
    io::write_dataset_file((fs::path(o.out_dir) / (std::string(name) + ".jsonl")).string(), *trajs, h);
    spdlog::info("{}: {} trajectories", name, trajs->size());
  }
}

void run_datagen_tumor(DatagenOptions& o, const Common& common) {
  o.tumor.seed = common.seed;
  o.tumor.validate();
  const auto cohorts = data::simulate_cohorts(o.tumor);
  fs::create_directories(o.out_dir);
  const std::pair<const char*, const std::vector<data::TumorTrajectory>*> parts[] = {
      {"train", &cohorts.train}, {"val", &cohorts.val}, {"test", &cohorts.test}};
  for (const auto& [name, patients] : parts) {
    io::write_tumor_dataset_file((fs::path(o.out_dir) / (std::string(name) + ".jsonl")).string(), o.tumor, *patients,
                                 Json{{"split", name}});
    spdlog::info("{}: {} patients", name, patients->size());
  }
  spdlog::info("treatment/diameter Spearman on train: {:.4f}", data::confounding_spearman(o.tumor, cohorts.train));
}

// ---- train ------------------------------------------------------------------

std::vector<std::string> ids_of(const std::vector<Trajectory>& trajs) {
  std::vector<std::string> ids;
  for (const auto& t : trajs) ids.push_back(t.id);
  return ids;
}

void run_train(TrainOptions& o, const Common& common, std::ostream& out) {
  const auto train_file = load_split(o.data, "train");
  const auto val_file = load_split(o.data, "val");
  if (train_file.trajectories.empty()) throw InvalidArgument("training split is empty");
  Json summary;
  if (!train_file.patients.empty() || o.kind == "outcome") {
    if (train_file.patients.empty()) throw InvalidArgument("outcome models need a tumor dataset");
    o.outcome.head = cf::parse_head_mode(o.head);
    o.outcome.balancing = cf::parse_balancing(o.balancing);
    o.cf_train.seed = common.seed;
    cf::OutcomePredictor model(o.outcome, ConditionRegistry::hashed(o.outcome.condition_dim, 0), common.seed);
    model.set_scale(cf::outcome_scale(train_file.patients));
    const auto result = cf::train_predictor(model, train_file.patients, val_file.patients, o.cf_train,
                                            [](std::size_t e, double tl, double vl) {
                                              spdlog::info("epoch {} train {:.6f} val {:.6f}", e, tl, vl);
                                            });
    io::write_checkpoint_file(o.out, io::make_checkpoint(model, common.seed, ids_of(train_file.trajectories)));
    summary = Json{{"kind", "outcome"}, {"model", model.kind()}, {"best_epoch", result.best_epoch},
                   {"epochs_run", result.val_loss.size()}, {"checkpoint", o.out}};
    if (!result.val_loss.empty()) summary["val_loss"] = result.val_loss;
  } else {
    o.model.variables = train_file.trajectories.front().variables();
    o.model.encoder.kind = parse_encoder_kind(o.encoder);
    o.train.seed = common.seed;
    auto model = make_model(o.kind, o.model, ConditionRegistry::hashed(o.model.condition_dim, 0), common.seed);
    model->set_scale(fit_scale(train_file.trajectories));
    model->set_variable_names(train_file.variable_names());
    std::ostringstream curve;
    curve << "epoch,train_loss,val_mae\n";
    const auto result = train(*model, train_file.trajectories, val_file.trajectories, o.train, [&](const EpochRecord& r) {
      spdlog::info("epoch {} loss {:.6f} val_mae {:.6f}", r.epoch, r.train_loss, r.val_mae);
      curve << r.epoch << ',' << std::setprecision(17) << r.train_loss << ',' << r.val_mae << '\n';
    });
    io::write_checkpoint_file(o.out, io::make_checkpoint(*model, ids_of(train_file.trajectories)));
    if (!o.curve.empty()) {
      std::ofstream f(o.curve);
      f << curve.str();
    }
    summary = Json{{"kind", model->kind()}, {"best_epoch", result.best_epoch}, {"best_val_mae", result.best_val_mae},
                   {"early_stopped", result.early_stopped}, {"epochs_run", result.curve.size()}, {"checkpoint", o.out}};
  }
  spdlog::info("wrote checkpoint {}", o.out);
  out << summary.dump(1) << '\n';
}

// ---- eval -------------------------------------------------------------------

std::unique_ptr<Forecaster> eval_forecaster(const EvalOptions& o, std::set<std::string>& train_ids,
                                            std::vector<std::string>& names) {
  if (!o.checkpoint.empty() && !o.baseline.empty()) throw InvalidArgument("use either --checkpoint or --baseline");
  if (!o.checkpoint.empty()) {
    const auto ckpt = io::read_checkpoint_file(o.checkpoint);
    train_ids.insert(ckpt.train_ids.begin(), ckpt.train_ids.end());
    auto model = io::load_model(ckpt);
    names = model->variable_names();
    return model;
  }
  if (o.baseline == "persistence") return std::make_unique<PersistenceForecaster>();
  if (o.baseline == "var") {
    const auto train_file = load_split(o.data, "train");
    for (const auto& t : train_file.trajectories) train_ids.insert(t.id);
    auto var = fit_var(train_file.trajectories, o.var_order);
    spdlog::info("VAR({}) spectral radius {:.6f}", o.var_order, var.spectral_radius());
    return std::make_unique<VarForecaster>(std::move(var));
  }
  throw InvalidArgument("eval needs --checkpoint or --baseline persistence|var");
}

data::Treatment parse_event(const std::string& text) {
  try {
    return data::treatment_from_token(text);
  } catch (const Error&) {
    throw InvalidArgument("unknown treatment '" + text + "'");
  }
}

void run_eval(const EvalOptions& o, const Common& common, std::ostream& out) {
  const auto file = load_split(o.data, o.split);
  io::ReportRows rows;
  if (o.protocol == "counterfactual") {
    if (file.patients.empty()) throw InvalidArgument("counterfactual evaluation needs a tumor dataset");
    const auto config = io::tumor_config_from_json(file.header.at("tumor"));
    std::vector<data::CounterfactualFuture> futures;
    std::mt19937_64 rng(common.seed);
    for (std::size_t i = 0; i < file.patients.size(); ++i) {
      auto f = o.futures == "random"
                   ? data::make_random_trajectories(config, file.patients[i], i, o.tau_max, o.per_origin, rng)
                   : data::make_single_sliding(config, file.patients[i], i, o.tau_max, parse_event(o.event));
      futures.insert(futures.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
    }
    if (o.futures != "random" && o.futures != "single-sliding") {
      throw InvalidArgument("unknown futures '" + o.futures + "' (single-sliding or random)");
    }
    spdlog::info("{} counterfactual futures", futures.size());
    std::unique_ptr<cf::OutcomeModel> model;
    if (!o.checkpoint.empty()) {
      model = io::load_outcome_model(io::read_checkpoint_file(o.checkpoint));
    } else if (o.baseline == "persistence") {
      model = std::make_unique<cf::PersistenceOutcome>();
    } else {
      throw InvalidArgument("counterfactual eval needs --checkpoint or --baseline persistence");
    }
    const auto nrmse = cf::evaluate_counterfactual(*model, file.patients, futures, o.tau_max, config.max_volume());
    rows = io::counterfactual_rows(nrmse, model->kind());
    emit(io::format_rows(rows, common.format), common, out);
    return;
  }

  std::set<std::string> train_ids;
  std::vector<std::string> names;
  const auto model = eval_forecaster(o, train_ids, names);
  if (names.empty()) names = file.variable_names();
  MetricReport report;
  if (o.protocol == "immediate") {
    report = evaluate_immediate(*model, file.trajectories);
  } else if (o.protocol == "delayed") {
    report = evaluate_delayed(*model, file.trajectories, o.horizon);
  } else if (o.protocol == "zeroshot-cf") {
    std::vector<Trajectory> cfs;
    for (const auto& t : file.trajectories) {
      if (t.cf_of) cfs.push_back(t);
    }
    if (cfs.empty()) throw InvalidArgument("split '" + o.split + "' holds no counterfactual trajectories");
    report = evaluate_zero_shot_cf(*model, cfs, train_ids);
  } else {
    throw InvalidArgument("unknown protocol '" + o.protocol + "'");
  }
  emit(io::format_rows(report.rows(names), common.format), common, out);
}

// ---- generate / intervene ---------------------------------------------------

Trajectory pick_trajectory(const std::string& data, const std::string& id, const std::string& split) {
  const auto file = load_split(data, split);
  if (id.empty()) {
    if (file.trajectories.empty()) throw InvalidArgument("dataset is empty");
    return file.trajectories.front();
  }
  for (const auto& t : file.trajectories) {
    if (t.id == id) return t;
  }
  throw InvalidArgument("no trajectory '" + id + "' in " + split_path(data, split));
}

std::vector<std::vector<std::string>> step_conditions(const std::vector<std::string>& specs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : specs) {
    std::vector<std::string> tokens;
    std::stringstream in(s);
    std::string token;
    while (std::getline(in, token, '|')) {
      if (!token.empty()) tokens.push_back(token);
    }
    out.push_back(tokens.empty() ? std::vector<std::string>{"none"} : tokens);
  }
  return out;
}

const ClefModel& require_clef(const SequenceModel& model) {
  const auto* clef = dynamic_cast<const ClefModel*>(&model);
  if (!clef) throw InvalidArgument("this command needs a concept (clef) checkpoint");
  return *clef;
}

void run_generate(const GenerateOptions& o, const Common& common, std::ostream& out) {
  const auto model = io::load_model(io::read_checkpoint_file(o.checkpoint));
  const ClefModel& clef = require_clef(*model);
  Trajectory t = pick_trajectory(o.data, o.trajectory, "test");
  const std::size_t keep = o.history_steps == 0 ? t.length() : o.history_steps;
  if (keep > t.length()) throw InvalidArgument("--history-steps exceeds the trajectory length");
  const Trajectory history = t.prefix(keep);
  const auto conds = step_conditions(o.conditions);
  const Trajectory rollout = clef.rollout(history, conds, o.steps);
  emit(io::trajectory_to_json(rollout).dump() + "\n", common, out);
}

int run_intervene(const GenerateOptions& o, const Common& common, std::ostream& out, std::ostream& err) {
  std::shared_ptr<const SequenceModel> model = io::load_model(io::read_checkpoint_file(o.checkpoint));
  require_clef(*model);
  Trajectory t = pick_trajectory(o.data, o.trajectory, "test");
  const std::size_t keep = o.history_steps == 0 ? t.length() : o.history_steps;
  if (keep > t.length()) throw InvalidArgument("--history-steps exceeds the trajectory length");
  Json body{{"history", io::trajectory_to_json(t.prefix(keep))}, {"edits", o.edit}, {"steps", o.steps}};
  if (!o.conditions.empty()) body["conditions"] = step_conditions(o.conditions);
  if (o.compare_observed) {
    if (keep == t.length()) throw InvalidArgument("--compare-observed needs --history-steps shorter than the trajectory");
    std::vector<std::vector<double>> observed(t.values.begin() + static_cast<std::ptrdiff_t>(keep), t.values.end());
    body["reference"] = observed;
  }
  service::Service svc(model);
  const auto response = svc.handle("POST", "/intervene", body.dump());
  if (response.status != 200) {
    err << "error: " << response.body.at("error").at("message").get<std::string>() << '\n';
    return kExitUsage;
  }
  emit(response.body.dump(1) + "\n", common, out);
  return kExitOk;
}

int run_serve(const ServeOptions& o) {
  std::shared_ptr<const SequenceModel> model;
  if (!o.checkpoint.empty()) model = io::load_model(io::read_checkpoint_file(o.checkpoint));
  service::Service svc(model);
  if (!svc.listen(o.host, o.port)) throw InvalidArgument("cannot listen on " + o.host + ":" + std::to_string(o.port));
  return kExitOk;
}

spdlog::level::level_enum parse_level(const std::string& text) {
  const auto level = spdlog::level::from_str(text);
  if (level == spdlog::level::off && text != "off") throw InvalidArgument("unknown log level '" + text + "'");
  return level;
}

/// Every option of the invoked command chain with its effective value.
void log_resolved(const CLI::App* app, const std::string& prefix) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h,--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    spdlog::info("config {}{}={}", prefix, opt->get_single_name(), value);
  }
  for (const CLI::App* sub : app->get_subcommands()) log_resolved(sub, prefix + sub->get_name() + ".");
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("clef", sink);
  logger->set_pattern("[%l] %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct RestoreLogger {
    std::shared_ptr<spdlog::logger> previous;
    ~RestoreLogger() { spdlog::set_default_logger(previous); }
  } restore_logger{previous};

  CLI::App app{"CLEF controllable sequence editing toolkit", "clef"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  Common common;
  app.add_option("--seed", common.seed, "random seed (CLEF_SEED overrides)");
  app.add_option("--log-level", common.log_level, "trace, debug, info, warn, error, off");

  DatagenOptions dg;
  auto* datagen = app.add_subcommand("datagen", "generate datasets");
  datagen->require_subcommand(1);
  auto* syn = datagen->add_subcommand("synthetic", "multiplicative branching trajectories");
  syn->add_option("--out", dg.out_dir, "output directory")->required();
  syn->add_option("--variables", dg.gen.variables);
  syn->add_option("--conditions", dg.gen.conditions);
  syn->add_option("--trajectories", dg.gen.trajectories);
  syn->add_option("--min-length", dg.gen.min_length);
  syn->add_option("--max-length", dg.gen.max_length);
  syn->add_option("--drift-range", dg.gen.drift_range);
  syn->add_option("--baseline-drift-range", dg.gen.baseline_drift_range);
  syn->add_option("--none-probability", dg.gen.none_probability);
  syn->add_option("--noise", dg.gen.noise_sigma);
  syn->add_option("--divergence", dg.gen.divergence);
  syn->add_flag("--counterfactual", dg.counterfactual, "original/counterfactual pairs with a zero-shot split");
  auto* tum = datagen->add_subcommand("tumor", "confounded tumor growth cohorts");
  tum->add_option("--out", dg.out_dir, "output directory")->required();
  tum->add_option("--gamma", dg.tumor.gamma);
  tum->add_option("--train", dg.tumor.train_count);
  tum->add_option("--val", dg.tumor.val_count);
  tum->add_option("--test", dg.tumor.test_count);
  tum->add_option("--max-steps", dg.tumor.max_steps);
  tum->add_flag("--effect-free", dg.tumor.effect_free);

  TrainOptions tr;
  auto* trn = app.add_subcommand("train", "train a forecaster or a counterfactual outcome model");
  trn->add_option("--data", tr.data, "dataset directory or file")->required();
  trn->add_option("--out", tr.out, "checkpoint path")->required();
  trn->add_option("--model", tr.kind, "clef, no-concept or outcome");
  trn->add_option("--curve", tr.curve, "write the training curve as CSV");
  trn->add_option("--condition-dim", tr.model.condition_dim);
  trn->add_option("--hidden-dim", tr.model.hidden_dim, "0 means the variable count");
  trn->add_flag("--ffn", tr.model.ffn_enabled);
  trn->add_option("--encoder", tr.encoder, "recurrent or attention");
  trn->add_option("--layers", tr.model.encoder.layers);
  trn->add_option("--heads", tr.model.encoder.heads);
  trn->add_option("--dropout", tr.model.encoder.dropout);
  trn->add_option("--epochs", tr.train.epochs);
  trn->add_option("--batch-size", tr.train.batch_size);
  trn->add_option("--pairs-per-trajectory", tr.train.pairs_per_trajectory);
  trn->add_option("--lr", tr.train.learning_rate);
  trn->add_option("--patience", tr.train.patience);
  trn->add_option("--horizon", tr.train.horizon, "largest training horizon");
  trn->add_option("--huber-delta", tr.train.huber_delta);
  trn->add_option("--head", tr.head, "outcome head: clef or plain");
  trn->add_option("--balancing", tr.balancing, "outcome balancing: none or gradient-reversal");
  trn->add_option("--lambda", tr.outcome.lambda);
  trn->add_option("--outcome-hidden", tr.outcome.hidden);
  trn->add_option("--outcome-layers", tr.outcome.layers);
  trn->add_option("--outcome-epochs", tr.cf_train.epochs);
  trn->add_option("--outcome-lr", tr.cf_train.learning_rate);
  trn->add_option("--tau", tr.cf_train.tau);

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "score a model");
  eval->require_subcommand(1);
  for (const char* protocol : {"immediate", "delayed", "zeroshot-cf", "counterfactual"}) {
    auto* sub = eval->add_subcommand(protocol);
    sub->add_option("--checkpoint", ev.checkpoint);
    sub->add_option("--baseline", ev.baseline, "persistence or var");
    sub->add_option("--var-order", ev.var_order);
    sub->add_option("--data", ev.data, "dataset directory or file")->required();
    sub->add_option("--split", ev.split);
    sub->add_option("--horizon", ev.horizon);
    sub->add_option("--tau-max", ev.tau_max);
    sub->add_option("--futures", ev.futures, "single-sliding or random");
    sub->add_option("--event", ev.event, "treatment placed by single-sliding futures");
    sub->add_option("--per-origin", ev.per_origin, "random futures per origin");
    sub->add_option("--format", common.format, "json or csv");
    sub->add_option("--out", common.out, "write the report here instead of stdout");
    sub->callback([&ev, sub] { ev.protocol = sub->get_name(); });
  }

  GenerateOptions gn;
  auto* gen = app.add_subcommand("generate", "autoregressive rollout from a trajectory");
  auto* itv = app.add_subcommand("intervene", "rollout under concept edits");
  for (auto* sub : {gen, itv}) {
    sub->add_option("--checkpoint", gn.checkpoint)->required();
    sub->add_option("--data", gn.data)->required();
    sub->add_option("--trajectory", gn.trajectory, "trajectory id (default: first test record)");
    sub->add_option("--history-steps", gn.history_steps, "history prefix length (default: all)");
    sub->add_option("--steps", gn.steps);
    sub->add_option("--condition", gn.conditions, "condition per generated step, tokens joined by '|'");
    sub->add_option("--out", common.out);
  }
  itv->add_option("--edit", gn.edit, "mode:variable:value[,...]")->required();
  itv->add_flag("--compare-observed", gn.compare_observed, "deltas against the observed continuation");

  ServeOptions sv;
  auto* srv = app.add_subcommand("serve", "HTTP/JSON inference service");
  srv->add_option("--checkpoint", sv.checkpoint);
  srv->add_option("--host", sv.host);
  srv->add_option("--port", sv.port);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    logger->set_level(parse_level(common.log_level));
    if (const char* env = std::getenv("CLEF_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        common.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw InvalidArgument(std::string("CLEF_SEED is not an unsigned integer: ") + env);
      }
    }
    spdlog::info("seed {}", common.seed);
    log_resolved(&app, "");
    if (common.format != "json" && common.format != "csv") {
      throw InvalidArgument("--format must be json or csv");
    }

    if (syn->parsed()) run_datagen_synthetic(dg, common);
    else if (tum->parsed()) run_datagen_tumor(dg, common);
    else if (trn->parsed()) run_train(tr, common, out);
    else if (!ev.protocol.empty()) run_eval(ev, common, out);
    else if (gen->parsed()) run_generate(gn, common, out);
    else if (itv->parsed()) return run_intervene(gn, common, out, err);
    else if (srv->parsed()) return run_serve(sv);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e) ? kExitUsage : kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace clef::cli
