#include "clef/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "clef/errors.hpp"

namespace clef::io {

namespace {

const char* kHex = "0123456789abcdef";

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
  return in;
}

Json treatments_json(const std::vector<data::Treatment>& ts) {
  Json a = Json::array();
  for (auto t : ts) a.push_back(data::treatment_token(t));
  return a;
}

std::vector<data::Treatment> treatments_from(const Json& a) {
  if (!a.is_array()) throw ParseError("treatments must be an array");
  std::vector<data::Treatment> out;
  for (const auto& t : a) {
    if (!t.is_string()) throw ParseError("treatment entries must be strings");
    try {
      out.push_back(data::treatment_from_token(t.get<std::string>()));
    } catch (const Error& e) {
      throw ParseError(e.what());
    }
  }
  return out;
}

Json tumor_record(const data::TumorTrajectory& p) {
  return Json{{"params",
               {{"rho", p.params.rho},
                {"alpha", p.params.alpha},
                {"beta", p.params.beta},
                {"beta_c", p.params.beta_c},
                {"stage", p.params.stage},
                {"initial_volume", p.params.initial_volume}}},
              {"treatments", treatments_json(p.treatments)},
              {"noise", p.noise},
              {"died", p.died},
              {"recovered", p.recovered}};
}

data::TumorTrajectory tumor_from(const Json& j, const Trajectory& view) {
  data::TumorTrajectory p;
  p.id = view.id;
  const Json& params = j.at("params");
  p.params.rho = field<double>(params, "rho");
  p.params.alpha = field<double>(params, "alpha");
  p.params.beta = field<double>(params, "beta");
  p.params.beta_c = field<double>(params, "beta_c");
  p.params.stage = field<int>(params, "stage");
  p.params.initial_volume = field<double>(params, "initial_volume");
  p.treatments = treatments_from(j.at("treatments"));
  p.noise = field<std::vector<double>>(j, "noise");
  p.died = field<bool>(j, "died");
  p.recovered = field<bool>(j, "recovered");
  for (const auto& row : view.values) {
    if (row.size() != 1) throw ParseError("tumor records have exactly one variable");
    p.volumes.push_back(row[0]);
  }
  if (p.treatments.size() != p.volumes.size()) throw ParseError("tumor treatments and volumes differ in length");
  return p;
}

void write_params(ParameterBlock& b, const ad::NamedTensor& p) {
  b.name = p.name;
  b.shape = {p.tensor.rows(), p.tensor.cols()};
  const auto d = p.tensor.data();
  b.values.assign(d.begin(), d.end());
}

void copy_blocks(const ad::ParameterList& params, const std::vector<ParameterBlock>& blocks) {
  if (params.size() != blocks.size()) {
    throw ParseError("checkpoint has " + std::to_string(blocks.size()) + " parameter blocks, model expects " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto& b = blocks[i];
    if (b.name != p.name) throw ParseError("parameter block " + std::to_string(i) + " is '" + b.name + "', expected '" + p.name + "'");
    if (b.shape.size() != 2 || b.shape[0] != p.tensor.rows() || b.shape[1] != p.tensor.cols()) {
      throw ParseError("parameter block '" + b.name + "' has the wrong shape");
    }
    auto dst = ad::Tensor(p.tensor).mutable_data();
    if (b.values.size() != dst.size()) throw ParseError("parameter block '" + b.name + "' has the wrong size");
    std::copy(b.values.begin(), b.values.end(), dst.begin());
  }
}

}  // namespace

std::string hex_encode(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xf]);
    }
  }
  return out;
}

std::vector<double> hex_decode(std::string_view text) {
  if (text.size() % 16 != 0) throw ParseError("hex block length is not a multiple of 16");
  std::vector<double> out(text.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const int hi = hex_digit(text[i * 16 + 2 * byte]);
      const int lo = hex_digit(text[i * 16 + 2 * byte + 1]);
      if (hi < 0 || lo < 0) throw ParseError("invalid hex digit in parameter block");
      bits |= static_cast<std::uint64_t>(hi * 16 + lo) << (8 * byte);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

// ---- datasets ---------------------------------------------------------------

std::vector<std::string> DatasetFile::variable_names() const {
  if (header.is_object() && header.contains("variables")) return header.at("variables").get<std::vector<std::string>>();
  std::vector<std::string> names;
  const std::size_t v = trajectories.empty() ? 0 : trajectories.front().variables();
  for (std::size_t k = 0; k < v; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

Json trajectory_to_json(const Trajectory& t) {
  Json ts = Json::array();
  for (const auto& s : t.timestamps) ts.push_back(s.iso());
  Json j{{"id", t.id}, {"timestamps", ts}, {"values", t.values}, {"conditions", t.conditions}};
  if (t.cf_of) j["cf_of"] = *t.cf_of;
  if (t.divergence) j["divergence"] = *t.divergence;
  return j;
}

Trajectory trajectory_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  Trajectory t;
  t.id = field<std::string>(j, "id");
  if (t.id.empty()) throw ParseError("empty trajectory id");
  for (const auto& s : field<std::vector<std::string>>(j, "timestamps")) {
    try {
      t.timestamps.push_back(Timestamp::parse(s));
    } catch (const Error& e) {
      throw ParseError(std::string("bad timestamp: ") + e.what());
    }
  }
  t.values = field<std::vector<std::vector<double>>>(j, "values");
  t.conditions = field<std::vector<std::vector<std::string>>>(j, "conditions");
  if (j.contains("cf_of") && !j.at("cf_of").is_null()) t.cf_of = field<std::string>(j, "cf_of");
  if (j.contains("divergence") && !j.at("divergence").is_null()) {
    const auto d = field<long long>(j, "divergence");
    if (d < 0) throw ParseError("divergence must be non-negative");
    t.divergence = static_cast<std::size_t>(d);
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  if (t.divergence && *t.divergence >= t.length()) throw ParseError("divergence beyond the trajectory end");
  return t;
}

void write_dataset(std::ostream& out, const std::vector<Trajectory>& trajectories, const Json& header) {
  if (!header.is_null()) {
    Json h = header;
    h["format"] = "clef-dataset";
    h["version"] = kDatasetVersion;
    out << h.dump() << '\n';
  }
  for (const auto& t : trajectories) out << trajectory_to_json(t).dump() << '\n';
  if (!out) throw Error("dataset write failed");
}

void write_tumor_dataset(std::ostream& out, const data::TumorSimConfig& config,
                         const std::vector<data::TumorTrajectory>& patients, const Json& header) {
  Json h = header.is_null() ? Json::object() : header;
  h["format"] = "clef-dataset";
  h["version"] = kDatasetVersion;
  h["variables"] = {"volume"};
  h["tumor"] = to_json(config);
  out << h.dump() << '\n';
  for (const auto& p : patients) {
    Json j = trajectory_to_json(data::to_trajectory(p));
    j["tumor"] = tumor_record(p);
    out << j.dump() << '\n';
  }
  if (!out) throw Error("dataset write failed");
}

DatasetFile read_dataset(std::istream& in, const std::string& source, const std::set<std::string>& sibling_ids) {
  DatasetFile file;
  std::set<std::string> ids;
  std::string line;
  std::size_t number = 0;
  bool first_record = true;
  bool tumor = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(where + "malformed JSON (" + e.what() + ")");
    }
    if (first_record && j.is_object() && j.contains("format")) {
      first_record = false;
      if (j.at("format") != "clef-dataset") throw ParseError(where + "not a clef dataset");
      if (j.value("version", 0) != kDatasetVersion) {
        throw ParseError(where + "unsupported dataset version " + j.value("version", Json()).dump());
      }
      file.header = j;
      tumor = j.contains("tumor");
      continue;
    }
    first_record = false;
    try {
      Trajectory t = trajectory_from_json(j);
      if (!ids.insert(t.id).second) throw ParseError("duplicate id '" + t.id + "'");
      if (tumor) {
        if (!j.contains("tumor")) throw ParseError("tumor dataset record without a 'tumor' object");
        file.patients.push_back(tumor_from(j.at("tumor"), t));
      }
      file.trajectories.push_back(std::move(t));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const Json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  if (!file.trajectories.empty()) {
    const std::size_t v = file.trajectories.front().variables();
    for (const auto& t : file.trajectories) {
      if (t.variables() != v) throw ParseError(source + ": trajectory '" + t.id + "' has a different variable count");
      if (t.cf_of && !ids.count(*t.cf_of) && !sibling_ids.count(*t.cf_of)) {
        throw ParseError(source + ": '" + t.id + "' links to unknown original '" + *t.cf_of + "'");
      }
    }
    if (file.header.is_object() && file.header.contains("variables") &&
        file.header.at("variables").size() != v) {
      throw ParseError(source + ": header variable names do not match the records");
    }
  }
  return file;
}

void write_dataset_file(const std::string& path, const std::vector<Trajectory>& trajectories, const Json& header) {
  auto out = open_out(path);
  write_dataset(out, trajectories, header);
}

void write_tumor_dataset_file(const std::string& path, const data::TumorSimConfig& config,
                              const std::vector<data::TumorTrajectory>& patients, const Json& header) {
  auto out = open_out(path);
  write_tumor_dataset(out, config, patients, header);
}

DatasetFile read_dataset_file(const std::string& path, const std::set<std::string>& sibling_ids) {
  auto in = open_in(path);
  return read_dataset(in, path, sibling_ids);
}

std::set<std::string> dataset_ids(const std::string& path) {
  auto in = open_in(path);
  std::set<std::string> ids;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      if (j.is_object() && j.contains("id")) ids.insert(j.at("id").get<std::string>());
    } catch (const Json::exception& e) {
      throw ParseError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return ids;
}

Json to_json(const data::TumorSimConfig& c) {
  return Json{{"gamma", c.gamma},
              {"train_count", c.train_count},
              {"val_count", c.val_count},
              {"test_count", c.test_count},
              {"max_steps", c.max_steps},
              {"seed", c.seed},
              {"rho_mean", c.rho_mean},
              {"rho_std", c.rho_std},
              {"alpha_mean", c.alpha_mean},
              {"alpha_std", c.alpha_std},
              {"alpha_beta_ratio", c.alpha_beta_ratio},
              {"beta_c_mean", c.beta_c_mean},
              {"beta_c_std", c.beta_c_std},
              {"carrying_capacity", c.carrying_capacity},
              {"chemo_half_life", c.chemo_half_life},
              {"chemo_dose", c.chemo_dose},
              {"radio_dose", c.radio_dose},
              {"noise_std", c.noise_std},
              {"window", c.window},
              {"max_diameter", c.max_diameter},
              {"offset_diameter", c.offset_diameter},
              {"min_volume", c.min_volume},
              {"effect_free", c.effect_free}};
}

data::TumorSimConfig tumor_config_from_json(const Json& j) {
  data::TumorSimConfig c;
  c.gamma = field<double>(j, "gamma");
  c.train_count = field<std::size_t>(j, "train_count");
  c.val_count = field<std::size_t>(j, "val_count");
  c.test_count = field<std::size_t>(j, "test_count");
  c.max_steps = field<std::size_t>(j, "max_steps");
  c.seed = field<std::uint64_t>(j, "seed");
  c.rho_mean = field<double>(j, "rho_mean");
  c.rho_std = field<double>(j, "rho_std");
  c.alpha_mean = field<double>(j, "alpha_mean");
  c.alpha_std = field<double>(j, "alpha_std");
  c.alpha_beta_ratio = field<double>(j, "alpha_beta_ratio");
  c.beta_c_mean = field<double>(j, "beta_c_mean");
  c.beta_c_std = field<double>(j, "beta_c_std");
  c.carrying_capacity = field<double>(j, "carrying_capacity");
  c.chemo_half_life = field<double>(j, "chemo_half_life");
  c.chemo_dose = field<double>(j, "chemo_dose");
  c.radio_dose = field<double>(j, "radio_dose");
  c.noise_std = field<double>(j, "noise_std");
  c.window = field<std::size_t>(j, "window");
  c.max_diameter = field<double>(j, "max_diameter");
  c.offset_diameter = field<double>(j, "offset_diameter");
  c.min_volume = field<double>(j, "min_volume");
  c.effect_free = field<bool>(j, "effect_free");
  c.validate();
  return c;
}

Json to_json(const data::GeneratorConfig& c) {
  return Json{{"variables", c.variables},
              {"conditions", c.conditions},
              {"trajectories", c.trajectories},
              {"min_length", c.min_length},
              {"max_length", c.max_length},
              {"drift_range", c.drift_range},
              {"baseline_drift_range", c.baseline_drift_range},
              {"none_probability", c.none_probability},
              {"noise_sigma", c.noise_sigma},
              {"seed", c.seed},
              {"divergence", c.divergence},
              {"cf_min_length", c.cf_min_length},
              {"cf_max_length", c.cf_max_length}};
}

// ---- checkpoints ------------------------------------------------------------

Json to_json(const ModelConfig& c) {
  return Json{{"variables", c.variables},
              {"condition_dim", c.condition_dim},
              {"hidden_dim", c.hidden_dim},
              {"ffn_enabled", c.ffn_enabled},
              {"encoder",
               {{"kind", to_string(c.encoder.kind)},
                {"input_dim", c.encoder.input_dim},
                {"hidden_dim", c.encoder.hidden_dim},
                {"layers", c.encoder.layers},
                {"heads", c.encoder.heads},
                {"dropout", c.encoder.dropout}}}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.variables = field<std::size_t>(j, "variables");
  c.condition_dim = field<std::size_t>(j, "condition_dim");
  c.hidden_dim = field<std::size_t>(j, "hidden_dim");
  c.ffn_enabled = field<bool>(j, "ffn_enabled");
  const Json& e = j.at("encoder");
  c.encoder.kind = parse_encoder_kind(field<std::string>(e, "kind"));
  c.encoder.input_dim = field<std::size_t>(e, "input_dim");
  c.encoder.hidden_dim = field<std::size_t>(e, "hidden_dim");
  c.encoder.layers = field<std::size_t>(e, "layers");
  c.encoder.heads = field<std::size_t>(e, "heads");
  c.encoder.dropout = field<double>(e, "dropout");
  return c;
}

Json to_json(const cf::OutcomeConfig& c) {
  return Json{{"head", cf::to_string(c.head)},
              {"balancing", cf::to_string(c.balancing)},
              {"lambda", c.lambda},
              {"hidden", c.hidden},
              {"condition_dim", c.condition_dim},
              {"layers", c.layers},
              {"dropout", c.dropout},
              {"autoregressive", c.autoregressive}};
}

cf::OutcomeConfig outcome_config_from_json(const Json& j) {
  cf::OutcomeConfig c;
  c.head = cf::parse_head_mode(field<std::string>(j, "head"));
  c.balancing = cf::parse_balancing(field<std::string>(j, "balancing"));
  c.lambda = field<double>(j, "lambda");
  c.hidden = field<std::size_t>(j, "hidden");
  c.condition_dim = field<std::size_t>(j, "condition_dim");
  c.layers = field<std::size_t>(j, "layers");
  c.dropout = field<double>(j, "dropout");
  c.autoregressive = field<bool>(j, "autoregressive");
  return c;
}

Json to_json(const ConditionRegistry& r) {
  Json stored = Json::object();
  for (const auto& [token, v] : r.stored()) stored[token] = hex_encode(v);
  return Json{{"mode", r.mode() == ConditionRegistry::Mode::hashed ? "hashed" : "strict"},
              {"dim", r.dim()},
              {"salt", r.salt()},
              {"stored", stored}};
}

ConditionRegistry registry_from_json(const Json& j) {
  const auto mode = field<std::string>(j, "mode");
  const auto dim = field<std::size_t>(j, "dim");
  ConditionRegistry r;
  if (mode == "hashed") {
    r = ConditionRegistry::hashed(dim, field<std::uint64_t>(j, "salt"));
  } else if (mode == "strict") {
    r = ConditionRegistry::strict(dim);
  } else {
    throw ParseError("unknown registry mode '" + mode + "'");
  }
  for (const auto& [token, hex] : j.at("stored").items()) r.insert(token, hex_decode(hex.get<std::string>()));
  return r;
}

Checkpoint make_checkpoint(const SequenceModel& model, std::vector<std::string> train_ids) {
  Checkpoint c;
  c.kind = model.kind();
  c.config = to_json(model.config());
  c.scale = model.scale();
  c.seed = model.seed();
  c.variable_names = model.variable_names();
  c.registry = to_json(model.registry());
  c.train_ids = std::move(train_ids);
  for (const auto& p : model.parameters()) write_params(c.blocks.emplace_back(), p);
  return c;
}

Checkpoint make_checkpoint(const cf::OutcomePredictor& model, std::uint64_t seed, std::vector<std::string> train_ids) {
  Checkpoint c;
  c.kind = "outcome";
  c.config = to_json(model.config());
  c.scale = {model.scale()};
  c.seed = seed;
  c.variable_names = {"volume"};
  c.registry = to_json(model.registry());
  c.train_ids = std::move(train_ids);
  for (const auto& p : model.parameters()) write_params(c.blocks.emplace_back(), p);
  return c;
}

std::unique_ptr<SequenceModel> load_model(const Checkpoint& ckpt) {
  if (ckpt.kind == "outcome") throw ParseError("checkpoint holds a counterfactual outcome model");
  std::unique_ptr<SequenceModel> model;
  try {
    model = make_model(ckpt.kind, model_config_from_json(ckpt.config), registry_from_json(ckpt.registry), ckpt.seed);
    model->set_scale(ckpt.scale);
    model->set_variable_names(ckpt.variable_names);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  copy_blocks(model->parameters(), ckpt.blocks);
  return model;
}

std::unique_ptr<cf::OutcomePredictor> load_outcome_model(const Checkpoint& ckpt) {
  if (ckpt.kind != "outcome") throw ParseError("checkpoint kind '" + ckpt.kind + "' is not an outcome model");
  if (ckpt.scale.size() != 1) throw ParseError("outcome checkpoint needs a single scale value");
  std::unique_ptr<cf::OutcomePredictor> model;
  try {
    model = std::make_unique<cf::OutcomePredictor>(outcome_config_from_json(ckpt.config),
                                                   registry_from_json(ckpt.registry), ckpt.seed);
    model->set_scale(ckpt.scale[0]);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  copy_blocks(model->parameters(), ckpt.blocks);
  return model;
}

Json checkpoint_to_json(const Checkpoint& ckpt) {
  Json blocks = Json::array();
  for (const auto& b : ckpt.blocks) blocks.push_back(Json{{"name", b.name}, {"shape", b.shape}, {"values", hex_encode(b.values)}});
  return Json{{"format_version", ckpt.format_version},
              {"kind", ckpt.kind},
              {"config", ckpt.config},
              {"scale", hex_encode(ckpt.scale)},
              {"seed", ckpt.seed},
              {"variables", ckpt.variable_names},
              {"registry", ckpt.registry},
              {"train_ids", ckpt.train_ids},
              {"parameters", blocks}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  Checkpoint c;
  c.format_version = field<int>(j, "format_version");
  if (c.format_version != kCheckpointVersion) {
    throw ParseError("checkpoint format_version " + std::to_string(c.format_version) + " is not supported (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  c.kind = field<std::string>(j, "kind");
  c.config = j.at("config");
  c.scale = hex_decode(field<std::string>(j, "scale"));
  c.seed = field<std::uint64_t>(j, "seed");
  c.variable_names = field<std::vector<std::string>>(j, "variables");
  c.registry = j.at("registry");
  c.train_ids = field_or<std::vector<std::string>>(j, "train_ids", {});
  for (const auto& b : field<Json>(j, "parameters")) {
    ParameterBlock block;
    block.name = field<std::string>(b, "name");
    block.shape = field<std::vector<std::size_t>>(b, "shape");
    block.values = hex_decode(field<std::string>(b, "values"));
    std::size_t n = 1;
    for (auto s : block.shape) n *= s;
    if (n != block.values.size()) throw ParseError("parameter block '" + block.name + "' does not match its shape");
    c.blocks.push_back(std::move(block));
  }
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
  if (!out) throw Error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
  auto out = open_out(path);
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint_file(const std::string& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

// ---- metric reports ---------------------------------------------------------

ReportRows counterfactual_rows(std::span<const double> nrmse_by_tau, const std::string& scope) {
  ReportRows rows;
  for (std::size_t r = 0; r < nrmse_by_tau.size(); ++r) {
    rows.push_back({"nrmse_percent", scope, r + 1,
                    std::isfinite(nrmse_by_tau[r]) ? std::optional<double>(nrmse_by_tau[r]) : std::nullopt});
  }
  return rows;
}

std::string format_json(const ReportRows& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    Json o{{"metric", r.metric}, {"scope", r.scope}, {"horizon", nullptr}, {"value", nullptr}};
    if (r.horizon) o["horizon"] = *r.horizon;
    if (r.value && std::isfinite(*r.value)) o["value"] = *r.value;
    a.push_back(std::move(o));
  }
  return a.dump(1) + "\n";
}

std::string format_csv(const ReportRows& rows) {
  std::ostringstream out;
  out << "metric,scope,horizon,value\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.scope << ',';
    if (r.horizon) out << *r.horizon;
    out << ',';
    if (r.value && std::isfinite(*r.value)) out << std::setprecision(17) << *r.value;
    out << '\n';
  }
  return out.str();
}

std::string format_rows(const ReportRows& rows, const std::string& format) {
  if (format == "json") return format_json(rows);
  if (format == "csv") return format_csv(rows);
  throw InvalidArgument("unknown report format '" + format + "' (expected json or csv)");
}

}  // namespace clef::io
