#pragma once

#include <random>
#include <string>
#include <vector>

#include "timeraf/tsdata.hpp"

namespace timeraf {

// One sinusoidal component drawn per series from these bands.
struct DomainSpec {
    std::string name;
    double freq_min = 0.01;   // cycles per sample
    double freq_max = 0.05;
    double amp_min = 0.5;
    double amp_max = 2.0;
    double trend_min = 0.0;   // slope per sample
    double trend_max = 0.0;
    double noise_sigma = 0.05;
    std::size_t components = 1;  // sinusoids summed per series
};

struct SyntheticSpec {
    std::vector<DomainSpec> domains;
    std::size_t series_per_domain = 5;
    std::size_t length = 2000;
};

// Benchmark recipe: domain A = low-frequency sinusoid + trend, B =
// high-frequency sinusoid, C = sum of two incommensurate sinusoids. C is held
// out of backbone pretraining.
SyntheticSpec default_synthetic_spec();

// One single-channel dataset per series; dataset_id = "<domain><index>".
std::vector<Series> gen_series(const SyntheticSpec& spec, std::uint64_t seed);

// Writes one CSV per series plus manifest.json into dir.
void write_dataset(const std::string& dir, const std::vector<Series>& series);

SyntheticSpec synthetic_spec_from_json(const std::string& path);

}  // namespace timeraf
