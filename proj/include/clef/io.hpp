#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clef/counterfactual.hpp"
#include "clef/data/synthetic.hpp"
#include "clef/data/tumor.hpp"
#include "clef/metrics.hpp"
#include "clef/model.hpp"
#include "clef/trajectory.hpp"

namespace clef::io {

using Json = nlohmann::json;

inline constexpr int kDatasetVersion = 1;
inline constexpr int kCheckpointVersion = 1;

/// 16 lowercase hex digits per value, little-endian byte order.
std::string hex_encode(std::span<const double> values);
std::vector<double> hex_decode(std::string_view text);

// ---- datasets ---------------------------------------------------------------

/// JSON Lines. An optional first line {"format": "clef-dataset", ...} carries
/// metadata; every other line is one trajectory. Tumor cohorts add a "tumor"
/// object per record (parameters, treatments, noise) so that counterfactual
/// futures can be re-simulated from the file alone.
struct DatasetFile {
  Json header;  // null when absent
  std::vector<Trajectory> trajectories;
  std::vector<data::TumorTrajectory> patients;  // tumor records only

  std::vector<std::string> variable_names() const;
};

Json trajectory_to_json(const Trajectory& t);
/// Throws ParseError naming the offending field.
Trajectory trajectory_from_json(const Json& j);

void write_dataset(std::ostream& out, const std::vector<Trajectory>& trajectories, const Json& header = nullptr);
void write_tumor_dataset(std::ostream& out, const data::TumorSimConfig& config,
                         const std::vector<data::TumorTrajectory>& patients, const Json& header = nullptr);
/// Validates every record plus unique ids and resolvable cf_of links. A link
/// may also point into `sibling_ids` (other splits of the same dataset, since
/// zero-shot splits keep originals and counterfactuals apart). Errors are
/// ParseError with "source:line: ..." messages.
DatasetFile read_dataset(std::istream& in, const std::string& source = "<input>",
                         const std::set<std::string>& sibling_ids = {});

void write_dataset_file(const std::string& path, const std::vector<Trajectory>& trajectories,
                        const Json& header = nullptr);
void write_tumor_dataset_file(const std::string& path, const data::TumorSimConfig& config,
                              const std::vector<data::TumorTrajectory>& patients, const Json& header = nullptr);
DatasetFile read_dataset_file(const std::string& path, const std::set<std::string>& sibling_ids = {});
/// Record ids of a dataset file, without validating the records.
std::set<std::string> dataset_ids(const std::string& path);

Json to_json(const data::TumorSimConfig& c);
data::TumorSimConfig tumor_config_from_json(const Json& j);
Json to_json(const data::GeneratorConfig& c);

// ---- checkpoints ------------------------------------------------------------

struct ParameterBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string kind;  // "clef", "no-concept" or "outcome"
  Json config;
  std::vector<double> scale;
  std::uint64_t seed = 0;
  std::vector<std::string> variable_names;
  Json registry;
  std::vector<std::string> train_ids;
  std::vector<ParameterBlock> blocks;
};

Checkpoint make_checkpoint(const SequenceModel& model, std::vector<std::string> train_ids = {});
Checkpoint make_checkpoint(const cf::OutcomePredictor& model, std::uint64_t seed,
                           std::vector<std::string> train_ids = {});
/// Rebuilds the model and copies every block; names and shapes must match.
std::unique_ptr<SequenceModel> load_model(const Checkpoint& ckpt);
std::unique_ptr<cf::OutcomePredictor> load_outcome_model(const Checkpoint& ckpt);

Json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ParseError on a missing field or a format_version other than the
/// supported one.
Checkpoint checkpoint_from_json(const Json& j);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::string& path);

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);
Json to_json(const cf::OutcomeConfig& c);
cf::OutcomeConfig outcome_config_from_json(const Json& j);
Json to_json(const ConditionRegistry& r);
ConditionRegistry registry_from_json(const Json& j);

// ---- metric reports ---------------------------------------------------------

using ReportRows = std::vector<MetricReport::Row>;

/// nRMSE rows for a counterfactual evaluation, horizon = tau.
ReportRows counterfactual_rows(std::span<const double> nrmse_by_tau, const std::string& scope = "counterfactual");

/// JSON array of {metric, scope, horizon, value}; missing values are null.
std::string format_json(const ReportRows& rows);
/// Header "metric,scope,horizon,value"; missing fields are empty.
std::string format_csv(const ReportRows& rows);
std::string format_rows(const ReportRows& rows, const std::string& format);

}  // namespace clef::io
