#include "timeraf/checkpoint.hpp"

#include "timeraf/binio.hpp"

namespace timeraf {

namespace {
constexpr char kMagic[4] = {'T', 'S', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json header;
    header["meta"] = ckpt.meta;
    nlohmann::json nets = nlohmann::json::array();
    for (const auto& [name, params] : ckpt.nets) {
        nlohmann::json shapes = nlohmann::json::array();
        for (const auto& l : params.layers)
            shapes.push_back({l.weight.rows, l.weight.cols});
        nets.push_back({{"name", name},
                        {"shapes", shapes},
                        {"final_linear", params.final_linear},
                        {"frozen", params.frozen}});
    }
    header["nets"] = nets;
    const std::string header_str = header.dump();

    BinWriter w(path);
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u64(header_str.size());
    w.str(header_str);
    for (const auto& [name, params] : ckpt.nets) {
        for (const auto& l : params.layers) {
            for (double v : l.weight.data) w.f64(v);
            for (double v : l.bias) w.f64(v);
        }
    }
    w.finish_with_checksum();
}

Checkpoint load_checkpoint(const std::string& path) {
    BinReader r(path);
    if (r.str(4) != std::string(kMagic, 4))
        throw FormatError(FormatError::Code::bad_magic, "not a TSCK file: " + path);
    const auto version = r.u16();
    if (version != kVersion)
        throw FormatError(FormatError::Code::bad_version,
                          "unsupported TSCK version " + std::to_string(version));
    const std::size_t header_len = r.u64();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str(header_len));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError("TSCK header parse error: " + std::string(e.what()));
    }
    Checkpoint ckpt;
    ckpt.meta = header.value("meta", nlohmann::json::object());
    for (const auto& net : header.at("nets")) {
        MlpParams params;
        params.final_linear = net.at("final_linear").get<bool>();
        params.frozen = net.at("frozen").get<bool>();
        for (const auto& shape : net.at("shapes")) {
            MlpLayer l;
            l.weight = Matrix(shape[0].get<std::size_t>(), shape[1].get<std::size_t>());
            l.bias.assign(l.weight.rows, 0.0);
            params.layers.push_back(std::move(l));
        }
        ckpt.nets.emplace(net.at("name").get<std::string>(), std::move(params));
    }
    for (auto& [name, params] : ckpt.nets) {
        for (auto& l : params.layers) {
            for (auto& v : l.weight.data) v = r.f64();
            for (auto& v : l.bias) v = r.f64();
        }
    }
    r.verify_checksum();
    return ckpt;
}

}  // namespace timeraf
