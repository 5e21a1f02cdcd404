#include "clef/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>

#include "clef/errors.hpp"
#include "clef/metrics.hpp"

namespace clef::service {

using io::Json;

namespace {

Json values_json(const std::vector<std::vector<double>>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) a.push_back(r);
  return a;
}

Json rollout_json(const Trajectory& t) {
  Json ts = Json::array();
  for (const auto& s : t.timestamps) ts.push_back(s.iso());
  return Json{{"timestamps", ts}, {"values", values_json(t.values)}, {"conditions", t.conditions}};
}

std::vector<std::vector<double>> matrix_from(const Json& j, const char* what) {
  const Json& m = j.is_object() && j.contains("values") ? j.at("values") : j;
  if (!m.is_array()) throw ParseError(std::string(what) + " must be a values matrix or a trajectory");
  try {
    return m.get<std::vector<std::vector<double>>>();
  } catch (const Json::exception&) {
    throw ParseError(std::string(what) + " must contain numeric rows");
  }
}

std::vector<std::string> condition_from(const Json& j) {
  if (j.is_null()) return {std::string(kNullCondition)};
  if (j.is_string()) return {j.get<std::string>()};
  try {
    return j.get<std::vector<std::string>>();
  } catch (const Json::exception&) {
    throw ParseError("conditions must be a string or a list of strings");
  }
}

Response ok(Json body) {
  body["schema_version"] = kSchemaVersion;
  return Response{200, std::move(body)};
}

}  // namespace

Response error_response(int status, const std::string& code, const std::string& message) {
  return Response{status, Json{{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", message}}}}};
}

Trajectory parse_history(const Json& j) {
  if (!j.is_object()) throw ParseError("history must be a JSON object");
  Json record = j;
  if (!record.contains("id")) record["id"] = "request";
  if (!record.contains("conditions") && record.contains("values") && record.at("values").is_array()) {
    record["conditions"] = Json::array();
    for (std::size_t k = 0; k < record.at("values").size(); ++k) record["conditions"].push_back({"none"});
  }
  Trajectory t = io::trajectory_from_json(record);
  if (t.length() == 0) throw ParseError("history is empty");
  return t;
}

EditSpec parse_edits(const Json& j, const SequenceModel& model) {
  if (j.is_string()) return EditSpec::parse(j.get<std::string>(), model.variable_names());
  if (!j.is_array()) throw ParseError("edits must be an array or an edit string");
  EditSpec spec;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("mode") || !e.contains("variable") || !e.contains("value")) {
      throw ParseError("each edit needs mode, variable and value");
    }
    EditSpec::Edit edit;
    const auto mode = e.at("mode").get<std::string>();
    if (mode == "scale") {
      edit.mode = EditSpec::Mode::scale;
    } else if (mode == "set") {
      edit.mode = EditSpec::Mode::set;
    } else {
      throw InvalidIntervention("unknown edit mode '" + mode + "'");
    }
    const Json& var = e.at("variable");
    try {
      edit.index = model.variable_index(var.is_string() ? var.get<std::string>() : std::to_string(var.get<long long>()));
    } catch (const InvalidArgument& ex) {
      throw InvalidIntervention(ex.what());
    }
    if (!e.at("value").is_number()) throw ParseError("edit value must be a number");
    edit.value = e.at("value").get<double>();
    spec.edits.push_back(edit);
  }
  return spec;
}

Service::Service(std::shared_ptr<const SequenceModel> model) : model_(std::move(model)) {}

Service::~Service() { stop(); }

void Service::swap_model(std::shared_ptr<const SequenceModel> model) {
  std::lock_guard lock(mutex_);
  model_ = std::move(model);
}

std::shared_ptr<const SequenceModel> Service::model() const {
  std::lock_guard lock(mutex_);
  return model_;
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  try {
    if (path == "/health") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return Response{200, Json{{"status", "ok"}}};
    }
    if (path == "/model") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return describe();
    }
    const bool known = path == "/forecast" || path == "/intervene" || path == "/similarity";
    if (!known) return error_response(404, "not_found", "no route " + path);
    if (method != "POST") return error_response(405, "method_not_allowed", "use POST");
    Json request;
    try {
      request = Json::parse(body);
    } catch (const Json::parse_error& e) {
      return error_response(400, "malformed_json", e.what());
    }
    if (!request.is_object()) return error_response(400, "malformed_request", "body must be a JSON object");
    if (path == "/forecast") return forecast(request);
    if (path == "/intervene") return intervene(request);
    return similarity(request);
  } catch (const ParseError& e) {
    return error_response(400, "malformed_request", e.what());
  } catch (const ShapeMismatch& e) {
    return error_response(400, "shape_mismatch", e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "malformed_request", e.what());
  } catch (const InvalidHorizon& e) {
    return error_response(422, "target_not_in_future", e.what());
  } catch (const InvalidIntervention& e) {
    return error_response(422, "invalid_intervention", e.what());
  } catch (const UnknownCondition& e) {
    return error_response(422, "unknown_condition", e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, "invalid_argument", e.what());
  } catch (const Error& e) {
    return error_response(500, "internal", e.what());
  }
}

Response Service::describe() const {
  const auto m = model();
  if (!m) return error_response(404, "no_model", "no model loaded");
  return ok(Json{{"kind", m->kind()},
                 {"variables", m->variables()},
                 {"variable_names", m->variable_names()},
                 {"config", io::to_json(m->config())},
                 {"seed", m->seed()},
                 {"parameters", ad::parameter_count(m->parameters())}});
}

Response Service::forecast(const Json& request) const {
  const auto m = model();
  if (!m) return error_response(404, "no_model", "no model loaded");
  if (!request.contains("history") || !request.contains("target_time")) {
    return error_response(400, "malformed_request", "forecast needs history and target_time");
  }
  const Trajectory history = parse_history(request.at("history"));
  if (history.variables() != m->variables()) {
    return error_response(400, "shape_mismatch", "history has " + std::to_string(history.variables()) +
                                                     " variables, model expects " + std::to_string(m->variables()));
  }
  Timestamp target;
  try {
    target = Timestamp::parse(request.at("target_time").get<std::string>());
  } catch (const Error& e) {
    return error_response(400, "malformed_request", std::string("target_time: ") + e.what());
  }
  if (target <= history.timestamps.back()) {
    return error_response(422, "target_not_in_future", "target_time must be after the last history timestamp");
  }
  const auto condition = condition_from(request.value("conditions", Json()));
  if (const auto* clef = dynamic_cast<const ClefModel*>(m.get())) {
    const Forecast f = clef->forward(history, condition, target);
    return ok(Json{{"prediction", f.prediction},
                   {"concept", f.concept_vec.values},
                   {"from", f.concept_vec.from.iso()},
                   {"to", f.concept_vec.to.iso()}});
  }
  const Query q{history.length() - 1, condition, target, std::nullopt};
  const auto pred = m->predict(history, std::span(&q, 1));
  return ok(Json{{"prediction", pred.front()}, {"concept", nullptr}});
}

Response Service::intervene(const Json& request) const {
  const auto m = model();
  if (!m) return error_response(404, "no_model", "no model loaded");
  const auto* clef = dynamic_cast<const ClefModel*>(m.get());
  if (!clef) return error_response(422, "unsupported_model", "interventions need a concept model");
  if (!request.contains("history") || !request.contains("edits")) {
    return error_response(400, "malformed_request", "intervene needs history and edits");
  }
  const Trajectory history = parse_history(request.at("history"));
  if (history.variables() != m->variables()) return error_response(400, "shape_mismatch", "history width differs from the model");
  const EditSpec edits = parse_edits(request.at("edits"), *m);
  if (edits.edits.empty()) return error_response(422, "invalid_intervention", "edit set is empty");
  const Json steps_json = request.value("steps", Json(kDefaultSteps));
  if (!steps_json.is_number_integer() || steps_json.get<long long>() < 1) {
    return error_response(400, "malformed_request", "steps must be a positive integer");
  }
  const auto steps = steps_json.get<std::size_t>();
  std::vector<std::vector<std::string>> conditions;
  if (request.contains("conditions")) {
    for (const auto& c : request.at("conditions")) conditions.push_back(condition_from(c));
  }

  const Trajectory baseline = clef->rollout(history, conditions, steps);
  const Trajectory edited = clef->rollout(history, conditions, steps, &edits);

  // delta = observed / generated; the unedited rollout stands in for the
  // observation when no reference is supplied.
  const bool has_reference = request.contains("reference") && !request.at("reference").is_null();
  const auto observed = has_reference ? matrix_from(request.at("reference"), "reference") : baseline.values;
  Json deltas = Json::array();
  const std::size_t rows = std::min(observed.size(), edited.values.size());
  for (std::size_t k = 0; k < rows; ++k) {
    if (observed[k].size() != edited.values[k].size()) return error_response(400, "shape_mismatch", "reference width differs");
    Json row = Json::array();
    for (std::size_t v = 0; v < observed[k].size(); ++v) {
      const double g = edited.values[k][v];
      const double o = observed[k][v];
      if (o == g) {
        row.push_back(1.0);
      } else if (g == 0.0 || !std::isfinite(o / g)) {
        row.push_back(nullptr);
      } else {
        row.push_back(o / g);
      }
    }
    deltas.push_back(std::move(row));
  }
  return ok(Json{{"rollout", rollout_json(edited)},
                 {"baseline", rollout_json(baseline)},
                 {"deltas", deltas},
                 {"reference", has_reference},
                 {"steps", steps}});
}

Response Service::similarity(const Json& request) const {
  if (!request.contains("trajectory_a") || !request.contains("trajectory_b")) {
    return error_response(400, "malformed_request", "similarity needs trajectory_a and trajectory_b");
  }
  const auto a = matrix_from(request.at("trajectory_a"), "trajectory_a");
  const auto b = matrix_from(request.at("trajectory_b"), "trajectory_b");
  const bool symmetric = request.value("symmetric", false);
  if (a.empty() || b.empty() || a.front().empty() || b.front().empty()) {
    return error_response(422, "no_overlap", "trajectories share no steps or variables");
  }
  // b is scored as a prediction of a.
  const auto score = trajectory_r2(b, a, symmetric);
  if (!score) return error_response(422, "r2_undefined", "reference has no variance on the shared steps");
  return ok(Json{{"r2", *score}, {"symmetric", symmetric}});
}

void Service::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const Response r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
    spdlog::debug("{} {} -> {}", req.method, req.path, r.status);
  };
  server_->Get(R"(/.*)", route);
  server_->Post(R"(/.*)", route);
}

bool Service::listen(const std::string& host, int port) {
  install_routes();
  spdlog::info("serving on http://{}:{}", host, port);
  return server_->listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
  install_routes();
  return server_->bind_to_any_port(host);
}

bool Service::listen_after_bind() { return server_ && server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace clef::service
