#include "timeraf/tsdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace timeraf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string lower;
    for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower == "nan" || lower == "na" || lower == "null";
}

// Linear interpolation over interior gaps, nearest-valid fill at the edges.
void fill_missing(Vector& v, const std::vector<bool>& present, const std::string& context) {
    std::size_t n = v.size();
    std::size_t first = n, last = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (present[i]) {
            if (first == n) first = i;
            last = i;
        }
    }
    if (first == n) throw DataError("empty column (all values missing): " + context);
    for (std::size_t i = 0; i < first; ++i) v[i] = v[first];
    for (std::size_t i = last + 1; i < n; ++i) v[i] = v[last];
    std::size_t i = first;
    while (i <= last) {
        if (present[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (!present[j]) ++j;  // j <= last
        const double lo = v[i - 1], hi = v[j];
        const double span = static_cast<double>(j - (i - 1));
        for (std::size_t t = i; t < j; ++t)
            v[t] = lo + (hi - lo) * static_cast<double>(t - (i - 1)) / span;
        i = j + 1;
    }
}

}  // namespace

std::vector<Series> load_csv(const std::string& path, const CsvSchema& schema,
                             const std::string& dataset_id, const std::string& domain,
                             const std::string& frequency) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    std::vector<std::size_t> value_idx;
    std::vector<std::string> value_names;
    if (schema.value_columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (!schema.timestamp_column.empty() && header[i] == schema.timestamp_column)
                continue;
            value_idx.push_back(i);
            value_names.push_back(header[i]);
        }
    } else {
        for (const auto& name : schema.value_columns) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end())
                throw DataError("CSV " + path + " has no column named '" + name + "'");
            value_idx.push_back(static_cast<std::size_t>(it - header.begin()));
            value_names.push_back(name);
        }
    }
    if (value_idx.empty()) throw DataError("no value columns in CSV: " + path);

    std::vector<Vector> columns(value_idx.size());
    std::vector<std::vector<bool>> present(value_idx.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size())
            throw DataError("CSV " + path + " row " + std::to_string(row) +
                            ": field count does not match header");
        for (std::size_t c = 0; c < value_idx.size(); ++c) {
            const std::string& cell = fields[value_idx[c]];
            if (is_missing(cell)) {
                columns[c].push_back(0.0);
                present[c].push_back(false);
                continue;
            }
            try {
                std::size_t consumed = 0;
                double val = std::stod(cell, &consumed);
                if (consumed != cell.size()) throw std::invalid_argument(cell);
                if (!std::isfinite(val)) {
                    columns[c].push_back(0.0);
                    present[c].push_back(false);
                } else {
                    columns[c].push_back(val);
                    present[c].push_back(true);
                }
            } catch (const std::exception&) {
                throw DataError("CSV " + path + " row " + std::to_string(row) +
                                " column '" + value_names[c] + "': non-numeric cell '" +
                                cell + "'");
            }
        }
    }

    std::vector<Series> out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        fill_missing(columns[c], present[c], path + ":" + value_names[c]);
        Series s;
        s.values = std::move(columns[c]);
        s.channel_id = value_names[c];
        s.dataset_id = dataset_id;
        s.domain = domain;
        s.frequency = frequency;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Series> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw DataError("manifest parse error: " + std::string(e.what()));
    }
    const nlohmann::json& entries = doc.is_array() ? doc : doc.at("datasets");
    std::string base_dir;
    if (auto pos = manifest_path.find_last_of('/'); pos != std::string::npos)
        base_dir = manifest_path.substr(0, pos + 1);

    std::vector<Series> all;
    for (const auto& entry : entries) {
        CsvSchema schema;
        schema.timestamp_column = entry.value("timestamp_column", std::string("t"));
        if (entry.contains("value_columns"))
            schema.value_columns = entry.at("value_columns").get<std::vector<std::string>>();
        const auto dataset_id = entry.at("dataset_id").get<std::string>();
        const auto domain = entry.at("domain").get<std::string>();
        const auto frequency = entry.value("frequency", std::string());
        for (const auto& f : entry.at("files")) {
            std::string path = f.get<std::string>();
            if (!path.empty() && path.front() != '/') path = base_dir + path;
            auto series = load_csv(path, schema, dataset_id, domain, frequency);
            for (auto& s : series) all.push_back(std::move(s));
        }
    }
    return all;
}

std::pair<Vector, NormStats> instance_normalize(const Vector& x) {
    if (x.empty()) throw ConfigError("instance_normalize: empty window");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;  // population variance
    NormStats stats{mean, std::max(std::sqrt(var), kEpsStd)};
    Vector xn(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xn[i] = (x[i] - mean) / stats.std;
    return {std::move(xn), stats};
}

Vector denormalize(const Vector& yn, const NormStats& stats) {
    Vector y(yn.size());
    for (std::size_t i = 0; i < yn.size(); ++i) y[i] = yn[i] * stats.std + stats.mean;
    return y;
}

Matrix patchify(const Vector& xn, std::size_t patch_len, std::size_t stride) {
    if (patch_len == 0 || stride == 0) throw ConfigError("patchify: zero patch_len/stride");
    if (xn.size() < patch_len) throw ConfigError("patchify: window shorter than patch");
    if ((xn.size() - patch_len) % stride != 0)
        throw ConfigError("patchify: (sl - patch_len) not divisible by stride");
    const std::size_t n = (xn.size() - patch_len) / stride + 1;
    Matrix patches(n, patch_len);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < patch_len; ++j)
            patches.at(i, j) = xn[i * stride + j];
    return patches;
}

std::vector<WindowPair> sliding_windows(const Series& series, std::size_t sl,
                                        std::size_t fl, std::size_t stride) {
    return windows_in_range(series, IndexRange{0, series.values.size()}, sl, fl, stride);
}

std::vector<WindowPair> windows_in_range(const Series& series, IndexRange range,
                                         std::size_t sl, std::size_t fl,
                                         std::size_t stride) {
    if (stride == 0) throw ConfigError("windows: zero stride");
    std::vector<WindowPair> pairs;
    if (range.end > series.values.size()) range.end = series.values.size();
    if (range.size() < sl + fl) return pairs;
    const std::size_t last_start = range.end - sl - fl;
    for (std::size_t start = range.begin; start <= last_start; start += stride) {
        WindowPair p;
        p.x.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start),
                   series.values.begin() + static_cast<std::ptrdiff_t>(start + sl));
        p.y.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start + sl),
                   series.values.begin() + static_cast<std::ptrdiff_t>(start + sl + fl));
        p.stats = instance_normalize(p.x).second;
        p.source = WindowSource{series.dataset_id, series.channel_id, start};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::array<IndexRange, 3> split(std::size_t length, const SplitSpec& spec) {
    if (spec.train < 0 || spec.val < 0 || spec.test < 0)
        throw ConfigError("split: negative fraction");
    if (spec.train + spec.val + spec.test > 1.0 + 1e-12)
        throw ConfigError("split: fractions sum above 1");
    const auto n = static_cast<double>(length);
    const std::size_t a = static_cast<std::size_t>(spec.train * n);
    const std::size_t b = a + static_cast<std::size_t>(spec.val * n);
    const std::size_t c = b + static_cast<std::size_t>(spec.test * n);
    if (c > length) throw ConfigError("split: degenerate ranges");
    return {IndexRange{0, a}, IndexRange{a, b}, IndexRange{b, c}};
}

}  // namespace timeraf
