#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "clef/io.hpp"
#include "clef/model.hpp"

namespace httplib {
class Server;
}

namespace clef::service {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kDefaultPort = 8642;
inline constexpr std::size_t kDefaultSteps = 10;

struct Response {
  int status = 200;
  io::Json body;
};

/// HTTP/JSON front end over an immutable model snapshot. Requests copy the
/// snapshot pointer under a lock and then run without it, so a reload never
/// changes a request in flight.
class Service {
 public:
  explicit Service(std::shared_ptr<const SequenceModel> model = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void swap_model(std::shared_ptr<const SequenceModel> model);
  std::shared_ptr<const SequenceModel> model() const;

  /// Transport-free dispatch; the HTTP routes forward here.
  Response handle(const std::string& method, const std::string& path, const std::string& body) const;

  /// Blocks until stop(). Returns false when the socket cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1; the caller then runs listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  Response forecast(const io::Json& request) const;
  Response intervene(const io::Json& request) const;
  Response similarity(const io::Json& request) const;
  Response describe() const;
  void install_routes();

  mutable std::mutex mutex_;
  std::shared_ptr<const SequenceModel> model_;
  std::unique_ptr<httplib::Server> server_;
};

/// {"error": {"code", "message"}, "schema_version"}.
Response error_response(int status, const std::string& code, const std::string& message);

/// Accepts a dataset-format record; id defaults to "request" and missing
/// conditions to "none" at every step.
Trajectory parse_history(const io::Json& j);

/// Array of {"mode": "scale"|"set", "variable": name or index, "value"} or
/// the CLI string form "scale:glucose:0.5,...".
EditSpec parse_edits(const io::Json& j, const SequenceModel& model);

}  // namespace clef::service
