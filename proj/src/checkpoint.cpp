#include "c2f/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "c2f/run_config.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native little-endian");

namespace c2f {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'C', '2', 'F', 'W'};

template <typename T>
const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ordered_json parse_manifest(const std::string& blob, std::size_t* payload_offset) {
    if (blob.size() < 16) throw FormatError("checkpoint too short for header");
    if (std::memcmp(blob.data(), kMagic, 4) != 0)
        throw FormatError("checkpoint magic mismatch");
    std::uint32_t version = 0;
    std::memcpy(&version, blob.data() + 4, 4);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    std::uint64_t mlen = 0;
    std::memcpy(&mlen, blob.data() + 8, 8);
    if (16 + mlen > blob.size()) throw FormatError("checkpoint manifest truncated");
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(blob.substr(16, static_cast<std::size_t>(mlen)));
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("tensors"))
        throw FormatError("checkpoint manifest missing config or tensors");
    *payload_offset = 16 + static_cast<std::size_t>(mlen);
    return manifest;
}

}  // namespace

template <typename T>
void checkpoint_save(Model<T>& m, const std::string& path) {
    ordered_json manifest;
    manifest["config"] = ordered_json::parse(model_config_to_json_text(m.cfg));
    ordered_json tensors = ordered_json::array();
    std::vector<const Tensor<T>*> order;
    for_each_param<T>(m, [&](const std::string& name, Tensor<T>& t) {
        ordered_json rec;
        rec["name"] = name;
        rec["dtype"] = dtype_name<T>();
        std::vector<std::int64_t> dims;
        for (int i = 0; i < t.shape().nd; ++i) dims.push_back(t.shape()[i]);
        rec["shape"] = dims;
        tensors.push_back(rec);
        order.push_back(&t);
    });
    manifest["tensors"] = tensors;
    const std::string mtext = manifest.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + tmp);
        out.write(kMagic, 4);
        const std::uint32_t version = kCheckpointVersion;
        out.write(reinterpret_cast<const char*>(&version), 4);
        const std::uint64_t mlen = mtext.size();
        out.write(reinterpret_cast<const char*>(&mlen), 8);
        out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
        for (const Tensor<T>* t : order) {
            out.write(reinterpret_cast<const char*>(t->data()),
                      static_cast<std::streamsize>(t->numel() * sizeof(T)));
        }
        if (!out) throw IoError("short write while saving checkpoint: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot move checkpoint into place: " + path);
}

template <typename T>
Model<T> checkpoint_load(const std::string& path) {
    const std::string blob = read_file(path);
    std::size_t payload_offset = 0;
    const ordered_json manifest = parse_manifest(blob, &payload_offset);

    ModelConfig cfg;
    try {
        cfg = model_config_from_json_text(manifest.at("config").dump());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config invalid: ") + e.what());
    }
    Rng rng(0);
    Model<T> m = build_model<T>(cfg, rng);

    std::vector<std::pair<std::string, Tensor<T>*>> params;
    for_each_param<T>(m, [&](const std::string& name, Tensor<T>& t) {
        params.emplace_back(name, &t);
    });
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size())
        throw FormatError("checkpoint tensor count " + std::to_string(tensors.size()) +
                          " does not match model (" + std::to_string(params.size()) + ")");

    std::size_t off = payload_offset;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& rec = tensors[i];
        if (rec.at("name").get<std::string>() != params[i].first)
            throw FormatError("checkpoint tensor order mismatch at '" + params[i].first + "'");
        if (rec.at("dtype").get<std::string>() != dtype_name<T>())
            throw FormatError("checkpoint dtype mismatch for '" + params[i].first + "'");
        const auto dims = rec.at("shape").get<std::vector<std::int64_t>>();
        Tensor<T>& t = *params[i].second;
        if (static_cast<int>(dims.size()) != t.shape().nd)
            throw FormatError("checkpoint shape rank mismatch for '" + params[i].first + "'");
        for (std::size_t d = 0; d < dims.size(); ++d) {
            if (dims[d] != t.shape()[static_cast<int>(d)])
                throw FormatError("checkpoint shape mismatch for '" + params[i].first + "'");
        }
        const std::size_t bytes = static_cast<std::size_t>(t.numel()) * sizeof(T);
        if (off + bytes > blob.size()) throw FormatError("checkpoint payload truncated");
        std::memcpy(t.data(), blob.data() + off, bytes);
        off += bytes;
    }
    if (off != blob.size()) throw FormatError("checkpoint has trailing bytes");
    return m;
}

std::string checkpoint_dtype(const std::string& path) {
    const std::string blob = read_file(path);
    std::size_t payload_offset = 0;
    const ordered_json manifest = parse_manifest(blob, &payload_offset);
    const auto& tensors = manifest.at("tensors");
    if (tensors.empty()) throw FormatError("checkpoint has no tensors");
    return tensors[0].at("dtype").get<std::string>();
}

template void checkpoint_save<float>(Model<float>&, const std::string&);
template void checkpoint_save<double>(Model<double>&, const std::string&);
template Model<float> checkpoint_load<float>(const std::string&);
template Model<double> checkpoint_load<double>(const std::string&);

}  // namespace c2f
