#include "hvc/range_coder.hpp"

#include <algorithm>

namespace hvc {

namespace {
constexpr uint64_t kTop = 1ull << 32;
constexpr uint64_t kMask64 = ~0ull;
constexpr unsigned __int128 kCarryBit = static_cast<unsigned __int128>(1) << 64;
} // namespace

void RangeEncoder::emit_word(uint64_t w) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<uint8_t>((w >> (8 * i)) & 0xff));
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
    check(freq >= 1 && cum + freq <= coding::kFreqTotal, ErrorKind::Internal,
          "range encoder: bad cum/freq");
    uint64_t unit = range_ >> 16;
    low_ += static_cast<unsigned __int128>(unit) * cum;
    if (low_ & kCarryBit) {
        // Carry crossed the emitted boundary: ripple +1 through the buffer.
        check(!buf_.empty(), ErrorKind::Internal, "range encoder: carry with empty output");
        for (size_t i = buf_.size(); i-- > 0;) {
            if (++buf_[i] != 0) break;
            check(i != 0 || buf_[0] != 0, ErrorKind::Internal,
                  "range encoder: carry out of payload");
        }
        low_ &= ~kCarryBit;
    }
    range_ = unit * freq;
    while (range_ < kTop) {
        emit_word(static_cast<uint64_t>(low_ >> 32) & 0xFFFFFFFFull);
        low_ = (low_ & 0xFFFFFFFFull) << 32;
        range_ <<= 32;
    }
}

std::vector<uint8_t> RangeEncoder::finish() {
    uint64_t lo = static_cast<uint64_t>(low_ & kMask64);
    emit_word((lo >> 32) & 0xFFFFFFFFull);
    emit_word(lo & 0xFFFFFFFFull);
    return std::move(buf_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    check(size % 4 == 0, ErrorKind::Truncation,
          "payload length is not a whole number of coder words");
    off_ = (read_word() << 32) | read_word();
}

uint64_t RangeDecoder::read_word() {
    check(pos_ + 4 <= size_, ErrorKind::Truncation, "payload ended before all symbols decoded");
    uint64_t w = 0;
    for (int i = 0; i < 4; ++i) w = (w << 8) | data_[pos_++];
    return w;
}

uint32_t RangeDecoder::decode_cum() {
    uint64_t unit = range_ >> 16;
    uint64_t c = off_ / unit;
    return static_cast<uint32_t>(std::min<uint64_t>(c, coding::kFreqTotal - 1));
}

void RangeDecoder::consume(uint32_t cum, uint32_t freq) {
    uint64_t unit = range_ >> 16;
    off_ -= unit * cum;
    range_ = unit * freq;
    while (range_ < kTop) {
        off_ = (off_ << 32) | read_word();
        range_ <<= 32;
    }
}

namespace {

template <class TableAt>
ChunkPayload encode_impl(const std::vector<int32_t>& symbols, TableAt&& table_at) {
    RangeEncoder enc;
    for (size_t i = 0; i < symbols.size(); ++i) {
        const PmfTable& t = table_at(i);
        int32_t s = symbols[i];
        check(s >= t.symbol_min && s <= t.symbol_max, ErrorKind::Internal,
              "encode_chunk: symbol " + std::to_string(s) + " outside table range");
        size_t k = static_cast<size_t>(s - t.symbol_min);
        enc.encode(t.cum[k], t.freq[k]);
    }
    ChunkPayload p;
    p.symbol_count = static_cast<uint32_t>(symbols.size());
    p.bytes = enc.finish();
    return p;
}

template <class TableAt>
std::vector<int32_t> decode_impl(const std::vector<uint8_t>& payload, uint32_t symbol_count,
                                 TableAt&& table_at) {
    RangeDecoder dec(payload.data(), payload.size());
    std::vector<int32_t> out(symbol_count);
    for (uint32_t i = 0; i < symbol_count; ++i) {
        const PmfTable& t = table_at(i);
        uint32_t c = dec.decode_cum();
        // cum is strictly increasing (freq >= 1), so upper_bound finds the slot.
        auto it = std::upper_bound(t.cum.begin(), t.cum.end(), c);
        size_t k = static_cast<size_t>(it - t.cum.begin()) - 1;
        dec.consume(t.cum[k], t.freq[k]);
        out[i] = t.symbol_min + static_cast<int32_t>(k);
    }
    return out;
}

} // namespace

ChunkPayload encode_chunk(const std::vector<int32_t>& symbols,
                          const std::vector<int32_t>& sigma_idx) {
    check(symbols.size() == sigma_idx.size(), ErrorKind::Internal,
          "encode_chunk: symbols/tables size mismatch");
    return encode_impl(symbols,
                       [&](size_t i) -> const PmfTable& { return pmf_for_sigma_index(sigma_idx[i]); });
}

std::vector<int32_t> decode_chunk(const std::vector<uint8_t>& payload, uint32_t symbol_count,
                                  const std::vector<int32_t>& sigma_idx) {
    check(symbol_count == sigma_idx.size(), ErrorKind::Internal,
          "decode_chunk: symbol_count/tables size mismatch");
    return decode_impl(payload, symbol_count, [&](size_t i) -> const PmfTable& {
        return pmf_for_sigma_index(sigma_idx[i]);
    });
}

ChunkPayload encode_chunk_tables(const std::vector<int32_t>& symbols,
                                 const std::vector<const PmfTable*>& tables) {
    check(symbols.size() == tables.size(), ErrorKind::Internal,
          "encode_chunk: symbols/tables size mismatch");
    return encode_impl(symbols, [&](size_t i) -> const PmfTable& { return *tables[i]; });
}

std::vector<int32_t> decode_chunk_tables(const std::vector<uint8_t>& payload,
                                         uint32_t symbol_count,
                                         const std::vector<const PmfTable*>& tables) {
    check(symbol_count == tables.size(), ErrorKind::Internal,
          "decode_chunk: symbol_count/tables size mismatch");
    return decode_impl(payload, symbol_count,
                       [&](size_t i) -> const PmfTable& { return *tables[i]; });
}

} // namespace hvc
