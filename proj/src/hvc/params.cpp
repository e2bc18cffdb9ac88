#include "hvc/params.hpp"

#include "hvc/io.hpp"

namespace hvc {

namespace {
constexpr char kCkptMagic[4] = {'H', 'V', 'C', 'P'};
constexpr uint32_t kCkptVersion = 1;
} // namespace

ParamId ParamStore::add(const std::string& name, Tensor value) {
    check(by_name_.find(name) == by_name_.end(), ErrorKind::Internal,
          "duplicate parameter name: " + name);
    ParamId id = static_cast<ParamId>(params_.size());
    Param p;
    p.name = name;
    p.grad = Tensor::zeros(value.shape(), value.dtype());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    by_name_[name] = id;
    return id;
}

ParamId ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

int64_t ParamStore::total_elements() const {
    int64_t n = 0;
    for (const Param& p : params_) n += p.value.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (Param& p : params_) p.grad.fill(0.0);
}

void save_checkpoint(const std::string& path, const ParamStore& store, uint64_t config_hash) {
    ByteWriter w;
    w.bytes(reinterpret_cast<const uint8_t*>(kCkptMagic), 4);
    w.u32(kCkptVersion);
    w.u64(config_hash);
    w.u32(static_cast<uint32_t>(store.size()));
    for (const Param& p : store) {
        w.str(p.name);
        w.u8(static_cast<uint8_t>(p.value.rank()));
        for (size_t i = 0; i < p.value.rank(); ++i) {
            w.u32(static_cast<uint32_t>(p.value.dim(i)));
        }
        for (int64_t i = 0; i < p.value.numel(); ++i) {
            w.f32(static_cast<float>(p.value.at(i)));
        }
    }
    write_file(path, w.data());
}

namespace {

void read_header(ByteReader& r, uint64_t* hash_out) {
    char magic[4];
    r.bytes(reinterpret_cast<uint8_t*>(magic), 4);
    check(std::string(magic, 4) == std::string(kCkptMagic, 4), ErrorKind::Format,
          "not a checkpoint file (bad magic)");
    uint32_t version = r.u32();
    check(version == kCkptVersion, ErrorKind::Format,
          "unsupported checkpoint version " + std::to_string(version));
    *hash_out = r.u64();
}

} // namespace

void load_checkpoint(const std::string& path, ParamStore& store, uint64_t expected_config_hash) {
    std::vector<uint8_t> buf = read_file(path);
    ByteReader r(buf);
    uint64_t hash = 0;
    read_header(r, &hash);
    check(hash == expected_config_hash, ErrorKind::Format,
          path + ": checkpoint was written for a different model config");
    uint32_t count = r.u32();
    check(count == store.size(), ErrorKind::Format,
          path + ": parameter count mismatch (" + std::to_string(count) + " stored, " +
              std::to_string(store.size()) + " expected)");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        ParamId id = store.find(name);
        check(id >= 0, ErrorKind::Format, path + ": unknown parameter " + name);
        Param& p = store.at(id);
        uint8_t rank = r.u8();
        check(rank == p.value.rank(), ErrorKind::Format, path + ": rank mismatch for " + name);
        for (size_t d = 0; d < rank; ++d) {
            uint32_t dim = r.u32();
            check(static_cast<int64_t>(dim) == p.value.dim(d), ErrorKind::Format,
                  path + ": shape mismatch for " + name);
        }
        for (int64_t e = 0; e < p.value.numel(); ++e) {
            p.value.set(e, static_cast<double>(r.f32()));
        }
    }
}

uint64_t checkpoint_config_hash(const std::string& path) {
    std::vector<uint8_t> buf = read_file(path);
    ByteReader r(buf);
    uint64_t hash = 0;
    read_header(r, &hash);
    return hash;
}

} // namespace hvc
