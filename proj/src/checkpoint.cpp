#include "styleaug/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace styleaug {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const json& meta,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    json header;
    header["kind"] = kind;
    header["meta"] = meta;
    json dir = json::array();
    for (const auto& [name, t] : tensors) {
        dir.push_back({{"name", name}, {"shape", t->shape()}});
    }
    header["tensors"] = dir;
    const std::string hs = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const uint32_t hlen = static_cast<uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), hs.size());
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->numel() * sizeof(double)));
    }
    if (!out) throw IngestionError("short write on checkpoint: " + path.string());
}

const Tensor& LoadedCheckpoint::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    return it->second;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::string& expected_kind) {
    if (!std::filesystem::exists(path))
        throw StageDependencyError("required artifact missing: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot read checkpoint: " + path.string());

    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path.string());
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw FormatError("truncated checkpoint header: " + path.string());

    json header = json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw FormatError("corrupt checkpoint header: " + path.string());

    LoadedCheckpoint ckpt;
    ckpt.kind = header.value("kind", "");
    ckpt.meta = header.value("meta", json::object());
    if (!expected_kind.empty() && ckpt.kind != expected_kind)
        throw FormatError("checkpoint kind '" + ckpt.kind + "' != expected '" + expected_kind +
                          "' in " + path.string());

    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw FormatError("truncated checkpoint blob '" + name + "': " + path.string());
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

}  // namespace styleaug
