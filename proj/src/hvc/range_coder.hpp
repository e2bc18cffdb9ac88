#pragma once

// Carry-exact range coder: 64-bit state, 32-bit renormalization words,
// 16-bit table totals. Carries are resolved by rippling through the output
// buffer (the whole payload lives in memory), which keeps the coder free of
// cache/pending bookkeeping. decode(encode(s)) == s exactly; a payload
// truncated anywhere raises ErrorKind::Truncation rather than returning
// wrong symbols.

#include <cstdint>
#include <vector>

#include "hvc/error.hpp"
#include "hvc/prob.hpp"

namespace hvc {

struct ChunkPayload {
    std::vector<uint8_t> bytes;
    uint32_t symbol_count = 0;
};

class RangeEncoder {
  public:
    // cum/freq from a PmfTable with total exactly 2^16.
    void encode(uint32_t cum, uint32_t freq);
    // Terminates the stream; emits the final state (exactly 8 bytes).
    std::vector<uint8_t> finish();

  private:
    void emit_word(uint64_t w);
    unsigned __int128 low_ = 0;
    uint64_t range_ = ~0ull;
    std::vector<uint8_t> buf_;
};

class RangeDecoder {
  public:
    RangeDecoder(const uint8_t* data, size_t size);

    // Cumulative-frequency slot of the next symbol (caller maps it to a
    // symbol via the table), then consume() with that symbol's cum/freq.
    uint32_t decode_cum();
    void consume(uint32_t cum, uint32_t freq);
    size_t bytes_read() const { return pos_; }

  private:
    uint64_t read_word();
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    uint64_t off_ = 0;
    uint64_t range_ = ~0ull;
};

// One table per symbol, chosen by its sigma-grid index (the codec path).
ChunkPayload encode_chunk(const std::vector<int32_t>& symbols,
                          const std::vector<int32_t>& sigma_idx);
std::vector<int32_t> decode_chunk(const std::vector<uint8_t>& payload, uint32_t symbol_count,
                                  const std::vector<int32_t>& sigma_idx);

// Explicit per-symbol tables (tests, adversarial distributions).
ChunkPayload encode_chunk_tables(const std::vector<int32_t>& symbols,
                                 const std::vector<const PmfTable*>& tables);
std::vector<int32_t> decode_chunk_tables(const std::vector<uint8_t>& payload,
                                         uint32_t symbol_count,
                                         const std::vector<const PmfTable*>& tables);

} // namespace hvc
