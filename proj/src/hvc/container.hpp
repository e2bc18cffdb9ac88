#pragma once

// On-disk bitstream: a fixed little-endian header followed by per-frame
// records whose per-scale chunks are ordered coarse -> fine. Any prefix of a
// frame's chunks is decodable, which is what progressive/partial decoding
// relies on. A presence bitmap per frame supports streams whose chunks were
// dropped before storage.

#include <cstdint>
#include <optional>
#include <vector>

#include "hvc/io.hpp"

namespace hvc {

constexpr uint32_t kContainerVersion = 1;

struct SequenceHeader {
    uint64_t config_hash = 0;
    uint32_t frame_width = 0;  // pre-padding
    uint32_t frame_height = 0; // pre-padding
    uint32_t frame_count = 0;
    uint32_t gop_size = 1;
    uint32_t lambda_q = 0; // metadata only; decoding never reads it
    uint16_t num_scales = 0;
};

struct Chunk {
    uint32_t symbol_count = 0;
    std::vector<uint8_t> bytes;
};

struct FrameRecord {
    uint8_t frame_type = 0;             // 0 intra, 1 inter
    std::vector<std::optional<Chunk>> chunks; // index = scale, coarse-first
};

struct Container {
    SequenceHeader header;
    std::vector<FrameRecord> frames;

    std::vector<uint8_t> serialize() const;
    static Container parse(const std::vector<uint8_t>& bytes);

    // Drops every chunk at scale >= k (prefix truncation used by tests and
    // the packet-loss tooling). Presence bitmap updated accordingly.
    Container truncated_to_scales(int64_t k) const;
    // Drops the chunks named by pattern[frame] (set of scale indices).
    Container with_dropped(const std::vector<std::vector<uint8_t>>& drop_flags) const;
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

} // namespace hvc
