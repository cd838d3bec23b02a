#pragma once

#include <filesystem>

#include "frf/graybox.hpp"
#include "frf/local.hpp"
#include "frf/plant.hpp"
#include "frf/sigproc.hpp"
#include "frf/types.hpp"

namespace frf::campaign {

struct EstimatorSpec {
    std::string method;  // H1 | ARI | LOG | JIO | LPM | LRM_MISO | LRM_MIMO | JIO_LRM
    int n_e = 1;
    int M = 1;  // classical block count
    local::LocalFitConfig local;
    bool fit = false;  // include this cell in the gray-box fit stage

    bool is_local() const;
    /// File stem of this cell, e.g. "LOG_ne12_M4" or "JIO_LRM_ne1".
    std::string cell_name() const;
};

struct ConfigurationSpec {
    bool random = false;
    int count = 0;
    double range_lo = -0.5, range_hi = 0.5;  // rad, uniform draw per joint
    std::vector<VectorXd> list;              // explicit configurations
};

struct GrayboxSection {
    plant::ThetaVector theta0;
    int n_starts = 3;
    double perturbation = 0.3;
    int max_iterations = 200;
    graybox::WeightOptions weights;
};

struct SimulationSection {
    int n_periods = 1;
    int settle_periods = 1;
    double reference_scale = 1.0;
};

struct CampaignConfig {
    int schema_version = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    plant::PlantModel plant;
    plant::ControllerConfig controller;
    plant::DisturbanceConfig disturbances;
    sigproc::MultisineSpec multisine;
    SimulationSection simulation;
    ConfigurationSpec configurations;
    std::vector<EstimatorSpec> estimators;
    GrayboxSection graybox;

    /// Largest experiment count any estimator consumes.
    int max_experiments() const;
    void validate() const;
};

/// Strict parser: unknown keys anywhere are rejected.
CampaignConfig parse_config(const std::string& json_text);
CampaignConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const CampaignConfig& cfg);

/// Configurations resolved to concrete joint vectors (random draws are
/// deterministic under the campaign seed).
std::vector<VectorXd> resolve_configurations(const CampaignConfig& cfg);

struct StageReport {
    bool ok = true;
    std::vector<std::string> failures;
    std::vector<std::string> notes;  // wall times and similar, never persisted
};

StageReport run_simulate(const CampaignConfig& cfg, const std::filesystem::path& out, int jobs);
StageReport run_estimate(const CampaignConfig& cfg, const std::filesystem::path& out, int jobs);
StageReport run_fit(const CampaignConfig& cfg, const std::filesystem::path& out, int jobs);
StageReport run_report(const CampaignConfig& cfg, const std::filesystem::path& out);

/// Role tags of the documented seed derivation derive_seed(seed, cfg, exp, role).
enum SeedRole : std::uint64_t {
    kSeedRolePhase = 1,
    kSeedRoleNoise = 2,
    kSeedRoleFitStarts = 3,
    kSeedRoleConfigDraw = 4,
};

}  // namespace frf::campaign
