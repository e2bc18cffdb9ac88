#include "hvc/container.hpp"

namespace hvc {

namespace {
constexpr char kMagic[4] = {'H', 'V', 'C', '1'};
}

std::vector<uint8_t> Container::serialize() const {
    ByteWriter w;
    w.bytes(reinterpret_cast<const uint8_t*>(kMagic), 4);
    w.u32(kContainerVersion);
    w.u64(header.config_hash);
    w.u32(header.frame_width);
    w.u32(header.frame_height);
    w.u32(header.frame_count);
    w.u32(header.gop_size);
    w.u32(header.lambda_q);
    w.u16(header.num_scales);
    w.u16(0); // reserved
    check(header.frame_count == frames.size(), ErrorKind::Internal,
          "container: header frame count mismatch");
    for (const FrameRecord& f : frames) {
        check(f.chunks.size() == header.num_scales, ErrorKind::Internal,
              "container: scale count mismatch");
        w.u8(f.frame_type);
        uint16_t bitmap = 0;
        for (size_t l = 0; l < f.chunks.size(); ++l) {
            if (f.chunks[l].has_value()) bitmap = static_cast<uint16_t>(bitmap | (1u << l));
        }
        w.u16(bitmap);
        for (const auto& ch : f.chunks) {
            if (!ch.has_value()) continue;
            w.u32(ch->symbol_count);
            w.u32(static_cast<uint32_t>(ch->bytes.size()));
            w.bytes(ch->bytes.data(), ch->bytes.size());
        }
    }
    return w.take();
}

Container Container::parse(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.bytes(reinterpret_cast<uint8_t*>(magic), 4);
    check(std::string(magic, 4) == std::string(kMagic, 4), ErrorKind::Format,
          "not a sequence container (bad magic)");
    uint32_t version = r.u32();
    check(version == kContainerVersion, ErrorKind::Format,
          "unsupported container version " + std::to_string(version));
    Container c;
    c.header.config_hash = r.u64();
    c.header.frame_width = r.u32();
    c.header.frame_height = r.u32();
    c.header.frame_count = r.u32();
    c.header.gop_size = r.u32();
    c.header.lambda_q = r.u32();
    c.header.num_scales = r.u16();
    r.u16(); // reserved
    check(c.header.gop_size >= 1, ErrorKind::Format, "container: gop_size must be >= 1");
    check(c.header.num_scales >= 1 && c.header.num_scales <= 16, ErrorKind::Format,
          "container: bad scale count");
    c.frames.resize(c.header.frame_count);
    for (uint32_t t = 0; t < c.header.frame_count; ++t) {
        FrameRecord& f = c.frames[t];
        f.frame_type = r.u8();
        check(f.frame_type <= 1, ErrorKind::Format, "container: bad frame type");
        uint16_t bitmap = r.u16();
        f.chunks.resize(c.header.num_scales);
        for (uint16_t l = 0; l < c.header.num_scales; ++l) {
            if (!(bitmap & (1u << l))) continue;
            Chunk ch;
            ch.symbol_count = r.u32();
            uint32_t len = r.u32();
            ch.bytes.resize(len);
            r.bytes(ch.bytes.data(), len);
            f.chunks[l] = std::move(ch);
        }
    }
    check(r.remaining() == 0, ErrorKind::Format, "container: trailing bytes after last frame");
    return c;
}

Container Container::truncated_to_scales(int64_t k) const {
    check(k >= 1, ErrorKind::Usage, "must keep at least one scale");
    Container out = *this;
    for (FrameRecord& f : out.frames) {
        for (size_t l = 0; l < f.chunks.size(); ++l) {
            if (static_cast<int64_t>(l) >= k) f.chunks[l].reset();
        }
    }
    return out;
}

Container Container::with_dropped(const std::vector<std::vector<uint8_t>>& drop_flags) const {
    Container out = *this;
    for (size_t t = 0; t < out.frames.size() && t < drop_flags.size(); ++t) {
        const auto& flags = drop_flags[t];
        for (size_t l = 0; l < out.frames[t].chunks.size() && l < flags.size(); ++l) {
            if (flags[l]) out.frames[t].chunks[l].reset();
        }
    }
    return out;
}

void save_container(const std::string& path, const Container& c) {
    write_file(path, c.serialize());
}

Container load_container(const std::string& path) { return Container::parse(read_file(path)); }

} // namespace hvc
