#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "timeraf/numkit.hpp"

namespace timeraf {

constexpr double kEpsStd = 1e-8;

// One univariate channel. Multivariate inputs are split into these at load
// time (channel-independent strategy).
struct Series {
    Vector values;
    std::string channel_id;
    std::string dataset_id;
    std::string domain;
    std::string frequency;
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

struct WindowSource {
    std::string dataset_id;
    std::string channel_id;
    std::size_t start = 0;
};

// One (lookback, horizon) training pair. x and y are raw (un-normalized);
// stats are x's own instance statistics.
struct WindowPair {
    Vector x;
    Vector y;
    NormStats stats;
    WindowSource source;
};

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    std::size_t size() const { return end - begin; }
};

struct CsvSchema {
    std::string timestamp_column;              // ignored for math; may be empty
    std::vector<std::string> value_columns;    // empty = all non-timestamp columns
};

// One Series per value column; missing cells filled by linear interpolation,
// edge gaps by the nearest valid value.
std::vector<Series> load_csv(const std::string& path, const CsvSchema& schema,
                             const std::string& dataset_id = "",
                             const std::string& domain = "",
                             const std::string& frequency = "");

// Reads a dataset manifest: a JSON array of
// {dataset_id, domain, frequency, files[], value_columns[]}.
std::vector<Series> load_manifest(const std::string& manifest_path);

std::pair<Vector, NormStats> instance_normalize(const Vector& x);
Vector denormalize(const Vector& yn, const NormStats& stats);

// Non-overlapping when stride == patch_len. (sl - patch_len) must divide
// evenly by stride; no implicit padding.
Matrix patchify(const Vector& xn, std::size_t patch_len, std::size_t stride);

// All (x, y) pairs; a too-short series yields an empty list.
std::vector<WindowPair> sliding_windows(const Series& series, std::size_t sl,
                                        std::size_t fl, std::size_t stride);

// Windows whose full [start, start+sl+fl) extent lies inside the range.
std::vector<WindowPair> windows_in_range(const Series& series, IndexRange range,
                                         std::size_t sl, std::size_t fl,
                                         std::size_t stride);

// Chronological train/val/test index ranges.
std::array<IndexRange, 3> split(std::size_t length, const SplitSpec& spec);

}  // namespace timeraf
