#pragma once

#include <string>

#include <json.hpp>

#include "specmix/augment.hpp"
#include "specmix/distill.hpp"
#include "specmix/eval.hpp"
#include "specmix/nn.hpp"
#include "specmix/pipeline.hpp"
#include "specmix/spectra.hpp"

// JSON bindings for the config and report types, plus file helpers that wrap
// parse failures in ParseError with the offending path.

namespace specmix::spectra {

void to_json(nlohmann::json& j, const MetabolitePeak& p);
void from_json(const nlohmann::json& j, MetabolitePeak& p);
void to_json(nlohmann::json& j, const LabelNoiseSpec& s);
void from_json(const nlohmann::json& j, LabelNoiseSpec& s);
void to_json(nlohmann::json& j, const CohortConfig& c);
void from_json(const nlohmann::json& j, CohortConfig& c);

} // namespace specmix::spectra

namespace specmix::nn {

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const EpochStats& s);
void to_json(nlohmann::json& j, const TrainLog& l);

} // namespace specmix::nn

namespace specmix::distill {

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);

} // namespace specmix::distill

namespace specmix::augment {

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

} // namespace specmix::augment

namespace specmix::eval {

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const CvSummary& s);

} // namespace specmix::eval

namespace specmix::pipeline {

void to_json(nlohmann::json& j, const SweepGrid& g);
void from_json(const nlohmann::json& j, SweepGrid& g);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

} // namespace specmix::pipeline

namespace specmix {

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

} // namespace specmix
