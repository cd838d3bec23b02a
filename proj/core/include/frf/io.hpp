#pragma once

#include <filesystem>
#include <string>

#include "frf/graybox.hpp"
#include "frf/metrics.hpp"
#include "frf/types.hpp"

namespace frf::io {

/// Whole-file atomic write: temp file in the same directory, then rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

struct TimeRecordMeta {
    double sample_rate = 0.0;
    int period_samples = 0;
    int n_periods = 0;
    int settle_periods = 0;
    std::uint64_t seed = 0;
};

/// CSV with header t,u1..u_nu,y1..y_ny,r1..r_nr plus a JSON metadata sidecar
/// (<path>.meta.json).
void write_time_record(const std::filesystem::path& csv_path, const TimeRecord& rec,
                       const TimeRecordMeta& meta);
std::pair<TimeRecord, TimeRecordMeta> read_time_record(const std::filesystem::path& csv_path);

/// Shared structured-text estimate format (JSON), bitwise-stable output.
void write_frf_estimate(const std::filesystem::path& path, const FrfEstimate& est);
FrfEstimate read_frf_estimate(const std::filesystem::path& path);

/// theta-hat with names, per-start table and cost trace; wall time is
/// deliberately not serialized so reruns are bit-identical.
void write_fit_result(const std::filesystem::path& path, const graybox::FitResult& fit,
                      const std::vector<std::string>& parameter_names);

}  // namespace frf::io
