#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "streammem/gateway.hpp"
#include "streammem/orchestrator.hpp"
#include "streammem/workloads.hpp"

namespace streammem {

struct DatasetSpec {
    std::string kind = "synth";  // synth | locomo | stream
    std::string path;
    SyntheticSpec synth;
};

struct GatewaySpec {
    std::string backend = "mock";  // mock | remote
    RemoteConfig remote;
};

/// One fully resolved experiment of a (possibly gridded) config file.
struct RunSpec {
    ExperimentConfig experiment;
    DatasetSpec dataset;
    GatewaySpec gateway;
    /// "key=value,..." for grid members, empty for a single run.
    std::string grid_label;
    std::filesystem::path output_dir;
};

/// Parses a YAML experiment file, applies `--set key=value` overrides and
/// expands the `ablate:` grid. Every run is validated. Throws ConfigError
/// naming the file and the dotted key.
std::vector<RunSpec> load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
std::vector<RunSpec> load_config_text(const std::string& yaml, const std::vector<std::string>& overrides = {},
                                      const std::string& source = "<config>");

struct LoadedDataset {
    StreamManifest stream;
    /// Synthetic datasets only.
    std::vector<AnswerKeyEntry> answer_key;
};

LoadedDataset load_dataset(const DatasetSpec& spec);

/// Mock backends share the store dimension; remote ones read the
/// environment for anything the config leaves empty.
std::shared_ptr<GatewayBackend> make_backend(const GatewaySpec& spec, const ExperimentConfig& cfg);

}  // namespace streammem
