#pragma once

// Little-endian byte IO used by the checkpoint and container formats, plus
// raw planar-RGB frame files.

#include <cstdint>
#include <string>
#include <vector>

#include "hvc/error.hpp"
#include "hvc/tensor.hpp"

namespace hvc {

class ByteWriter {
  public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f32(float v);
    void bytes(const uint8_t* p, size_t n);
    void str(const std::string& s); // u16 length + bytes

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

  private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
  public:
    ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : p_(v.data()), n_(v.size()) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    float f32();
    void bytes(uint8_t* out, size_t n);
    std::string str();
    void skip(size_t n);

    size_t pos() const { return pos_; }
    size_t remaining() const { return n_ - pos_; }

  private:
    void need(size_t n) const {
        check(pos_ + n <= n_, ErrorKind::Truncation, "input ended early");
    }
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& data);

// FNV-1a 64-bit, the hash used for config fingerprints and golden fixtures.
uint64_t fnv1a64(const uint8_t* p, size_t n);
uint64_t fnv1a64(const std::string& s);

// Raw video: optional 16-byte header ("RGB8", u32 w, u32 h, u32 frames)
// followed by frames of planar 8-bit RGB (w*h R, then G, then B).
struct RawVideo {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<Tensor> frames; // each (1,3,H,W), values in [0,1]
};

RawVideo load_raw_video(const std::string& path, int64_t width_hint = 0, int64_t height_hint = 0);
void save_raw_video(const std::string& path, const std::vector<Tensor>& frames,
                    bool with_header = true);

// [0,1] float frame <-> 8-bit planar bytes (half-away rounding, clamped).
std::vector<uint8_t> frame_to_bytes(const Tensor& frame);
Tensor frame_from_bytes(const uint8_t* p, int64_t w, int64_t h, Dtype dt);

} // namespace hvc
