#include "timeraf/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace timeraf {

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    DomainSpec a;
    a.name = "A";
    a.freq_min = 1.0 / 40.0;
    a.freq_max = 1.0 / 30.0;
    a.amp_min = 0.8;
    a.amp_max = 1.5;
    a.trend_min = -0.002;
    a.trend_max = 0.002;
    a.noise_sigma = 0.05;
    DomainSpec b;
    b.name = "B";
    b.freq_min = 1.0 / 10.0;
    b.freq_max = 1.0 / 7.0;
    b.amp_min = 0.8;
    b.amp_max = 1.5;
    b.noise_sigma = 0.05;
    DomainSpec c;
    c.name = "C";
    c.freq_min = 1.0 / 24.0;
    c.freq_max = 1.0 / 14.0;
    c.amp_min = 0.6;
    c.amp_max = 1.2;
    c.noise_sigma = 0.05;
    c.components = 2;
    spec.domains = {a, b, c};
    return spec;
}

std::vector<Series> gen_series(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.domains.size() < 2)
        throw ConfigError("gen_series: need at least 2 domains for leakage tests");
    std::mt19937_64 rng(seed);
    std::vector<Series> out;
    for (const auto& dom : spec.domains) {
        for (std::size_t s = 0; s < spec.series_per_domain; ++s) {
            std::uniform_real_distribution<double> freq(dom.freq_min, dom.freq_max);
            std::uniform_real_distribution<double> amp(dom.amp_min, dom.amp_max);
            std::uniform_real_distribution<double> trend(dom.trend_min, dom.trend_max);
            std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
            std::normal_distribution<double> noise(0.0, dom.noise_sigma);

            struct Component {
                double f, a, ph;
            };
            std::vector<Component> comps;
            for (std::size_t c = 0; c < std::max<std::size_t>(dom.components, 1); ++c)
                comps.push_back({freq(rng), amp(rng), phase(rng)});
            const double slope = trend(rng);

            Series series;
            series.values.resize(spec.length);
            for (std::size_t t = 0; t < spec.length; ++t) {
                double v = slope * static_cast<double>(t);
                for (const auto& c : comps)
                    v += c.a * std::sin(2.0 * std::numbers::pi * c.f *
                                            static_cast<double>(t) +
                                        c.ph);
                v += noise(rng);
                series.values[t] = v;
            }
            series.channel_id = "v";
            series.dataset_id = dom.name + std::to_string(s);
            series.domain = dom.name;
            series.frequency = "synthetic";
            out.push_back(std::move(series));
        }
    }
    return out;
}

void write_dataset(const std::string& dir, const std::vector<Series>& series) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    char buf[64];
    for (const auto& s : series) {
        const std::string file = s.dataset_id + ".csv";
        std::ofstream out(dir + "/" + file);
        if (!out) throw DataError("cannot write " + dir + "/" + file);
        out << "t," << s.channel_id << "\n";
        for (std::size_t t = 0; t < s.values.size(); ++t) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", t, s.values[t]);
            out << buf;
        }
        manifest.push_back({{"dataset_id", s.dataset_id},
                            {"domain", s.domain},
                            {"frequency", s.frequency},
                            {"timestamp_column", "t"},
                            {"value_columns", {s.channel_id}},
                            {"files", {file}}});
    }
    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw DataError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open synthetic spec: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("synthetic spec parse error: " + std::string(e.what()));
    }
    SyntheticSpec spec;
    spec.series_per_domain = doc.value("series_per_domain", spec.series_per_domain);
    spec.length = doc.value("length", spec.length);
    for (const auto& d : doc.at("domains")) {
        DomainSpec dom;
        dom.name = d.at("name").get<std::string>();
        dom.freq_min = d.value("freq_min", dom.freq_min);
        dom.freq_max = d.value("freq_max", dom.freq_max);
        dom.amp_min = d.value("amp_min", dom.amp_min);
        dom.amp_max = d.value("amp_max", dom.amp_max);
        dom.trend_min = d.value("trend_min", dom.trend_min);
        dom.trend_max = d.value("trend_max", dom.trend_max);
        dom.noise_sigma = d.value("noise_sigma", dom.noise_sigma);
        dom.components = d.value("components", dom.components);
        spec.domains.push_back(dom);
    }
    return spec;
}

}  // namespace timeraf
