#include "ioev/nn/checkpoint.hpp"

#include <map>

#include "ioev/core/bytes.hpp"
#include "ioev/core/error.hpp"

namespace ioev::nn {

namespace {
constexpr std::string_view kMagic = "IOEVCKPT";
constexpr uint32_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const std::string& kind, const nlohmann::json& config, const ParamSet& params) {
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kVersion);
    w.str(kind);
    w.str(config.dump());
    w.u32(static_cast<uint32_t>(params.params().size()));
    for (const Param* p : params.params()) {
        w.str(p->name);
        w.u32(static_cast<uint32_t>(p->value.rows()));
        w.u32(static_cast<uint32_t>(p->value.cols()));
        w.f64s({p->value.data(), static_cast<size_t>(p->value.size())});
    }
    return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
        fail(ErrorCode::ParseError, "not a checkpoint (bad magic)");
    }
    uint32_t version = r.u32();
    require(version == kVersion, ErrorCode::ParseError, "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.kind = r.str();
    ck.config = nlohmann::json::parse(r.str());
    uint32_t n = r.u32();
    for (uint32_t k = 0; k < n; ++k) {
        std::string name = r.str();
        uint32_t rows = r.u32();
        uint32_t cols = r.u32();
        auto data = r.f64s(static_cast<size_t>(rows) * cols);
        Matrix m = Eigen::Map<Matrix>(data.data(), rows, cols);
        ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ck;
}

void restore_params(const Checkpoint& ckpt, const ParamSet& params) {
    std::map<std::string, const Matrix*> by_name;
    for (const auto& [name, m] : ckpt.tensors) by_name[name] = &m;
    for (Param* p : params.params()) {
        auto it = by_name.find(p->name);
        require(it != by_name.end(), ErrorCode::ParseError, "checkpoint lacks tensor " + p->name);
        require(it->second->rows() == p->value.rows() && it->second->cols() == p->value.cols(),
                ErrorCode::ShapeMismatch, "checkpoint tensor " + p->name + " has wrong shape");
        p->value = *it->second;
    }
}

}  // namespace ioev::nn
