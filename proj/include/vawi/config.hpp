#pragma once

#include <string>

#include "vawi/inject.hpp"

namespace vawi {

// Everything a run needs, merged from one JSON file plus flag overrides.
// The hash is computed over the canonicalized (key-sorted) JSON form, so two
// semantically identical configs hash identically regardless of key order.
struct RunConfig {
    EncoderConfig plm;
    EncoderConfig vl;
    InjectionConfig injection;
    TrainConfig training;
    SyntheticTaskSpec task;
    std::size_t l_max = 16;

    static RunConfig defaults();
    ModelConfig model_config() const;

    void validate() const;
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig run_config_from_file(const std::string& path);
std::string run_config_to_json_text(const RunConfig& config);

// FNV-1a over the canonical JSON dump, rendered as 16 hex digits.
std::string config_hash(const RunConfig& config);

std::string metrics_to_json_text(const Metrics& metrics, const std::string& hash);

} // namespace vawi
