#include "hvc/io.hpp"

#include <cstring>
#include <fstream>

#include "hvc/detmath.hpp"

namespace hvc {

void ByteWriter::u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v & 0xff));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
}

void ByteWriter::bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }

void ByteWriter::str(const std::string& s) {
    check(s.size() <= 0xffff, ErrorKind::Internal, "string too long for u16 length");
    u16(static_cast<uint16_t>(s.size()));
    bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

uint8_t ByteReader::u8() {
    need(1);
    return p_[pos_++];
}

uint16_t ByteReader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(p_[pos_] | (p_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float ByteReader::f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

void ByteReader::bytes(uint8_t* out, size_t n) {
    need(n);
    std::memcpy(out, p_ + pos_, n);
    pos_ += n;
}

std::string ByteReader::str() {
    uint16_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
}

void ByteReader::skip(size_t n) {
    need(n);
    pos_ += n;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), ErrorKind::Io, "cannot open " + path);
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    check(f.good(), ErrorKind::Io, "read failed: " + path);
    return buf;
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), ErrorKind::Io, "cannot create " + path);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    check(f.good(), ErrorKind::Io, "write failed: " + path);
}

uint64_t fnv1a64(const uint8_t* p, size_t n) {
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

std::vector<uint8_t> frame_to_bytes(const Tensor& frame) {
    check(frame.rank() == 4 && frame.dim(0) == 1 && frame.dim(1) == 3, ErrorKind::Usage,
          "expected (1,3,H,W) frame, got " + shape_str(frame.shape()));
    int64_t n = frame.numel();
    std::vector<uint8_t> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double v = frame.at(i);
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        out[static_cast<size_t>(i)] =
            static_cast<uint8_t>(detmath::round_half_away(v * 255.0));
    }
    return out;
}

Tensor frame_from_bytes(const uint8_t* p, int64_t w, int64_t h, Dtype dt) {
    Tensor t = Tensor::zeros({1, 3, h, w}, dt);
    int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) {
        t.set(i, static_cast<double>(p[i]) / 255.0);
    }
    return t;
}

RawVideo load_raw_video(const std::string& path, int64_t width_hint, int64_t height_hint) {
    std::vector<uint8_t> buf = read_file(path);
    RawVideo v;
    size_t off = 0;
    int64_t frame_count = -1;
    if (buf.size() >= 16 && std::memcmp(buf.data(), "RGB8", 4) == 0) {
        ByteReader r(buf.data() + 4, 12);
        v.width = r.u32();
        v.height = r.u32();
        frame_count = r.u32();
        off = 16;
    } else {
        check(width_hint > 0 && height_hint > 0, ErrorKind::Usage,
              "raw video has no header; --width/--height required");
        v.width = width_hint;
        v.height = height_hint;
    }
    size_t frame_bytes = static_cast<size_t>(v.width * v.height * 3);
    check(frame_bytes > 0, ErrorKind::Io, "bad raw video dimensions");
    size_t avail = (buf.size() - off) / frame_bytes;
    check((buf.size() - off) % frame_bytes == 0, ErrorKind::Io,
          path + ": size is not a whole number of " + std::to_string(v.width) + "x" +
              std::to_string(v.height) + " frames");
    if (frame_count >= 0) {
        check(static_cast<size_t>(frame_count) == avail, ErrorKind::Io,
              path + ": header frame count mismatch");
    }
    for (size_t i = 0; i < avail; ++i) {
        v.frames.push_back(
            frame_from_bytes(buf.data() + off + i * frame_bytes, v.width, v.height, Dtype::F32));
    }
    return v;
}

void save_raw_video(const std::string& path, const std::vector<Tensor>& frames,
                    bool with_header) {
    check(!frames.empty(), ErrorKind::Usage, "no frames to save");
    int64_t h = frames[0].dim(2), w = frames[0].dim(3);
    ByteWriter bw;
    if (with_header) {
        bw.bytes(reinterpret_cast<const uint8_t*>("RGB8"), 4);
        bw.u32(static_cast<uint32_t>(w));
        bw.u32(static_cast<uint32_t>(h));
        bw.u32(static_cast<uint32_t>(frames.size()));
    }
    for (const Tensor& f : frames) {
        check(f.dim(2) == h && f.dim(3) == w, ErrorKind::Usage, "frame dims differ");
        auto fb = frame_to_bytes(f);
        bw.bytes(fb.data(), fb.size());
    }
    write_file(path, bw.data());
}

} // namespace hvc
