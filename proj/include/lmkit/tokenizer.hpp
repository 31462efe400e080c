#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmkit/data.hpp"

namespace lmkit {

// Byte-level BPE tokenizer. Id layout: [0,256) raw bytes, then BOS/EOS/PAD,
// then learned merges in training order, then extended vocabulary tokens.
// Byte fallback means every string tokenizes; extended tokens are matched
// literally in text (longest match first) before BPE runs on the remaining
// segments. The three control specials never match from raw text.
class Tokenizer {
  public:
    static constexpr int kByteTokens = 256;
    static constexpr int kBaseVocab = 259;  // bytes + BOS/EOS/PAD

    struct Merge {
        std::int32_t left;
        std::int32_t right;
        std::int32_t result;
    };

    Tokenizer();

    int bos() const { return bos_; }
    int eos() const { return eos_; }
    int pad() const { return pad_; }
    int vocab_size() const { return static_cast<int>(vocab_.size()); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::vector<Merge>& merges() const { return merges_; }
    const std::vector<std::int32_t>& literal_ids() const { return literals_; }

    std::vector<std::int32_t> tokenize(std::string_view text) const;
    std::string detokenize(std::span<const std::int32_t> ids) const;
    // Token's surface form ("<eos>" for specials, raw bytes otherwise).
    const std::string& piece(std::int32_t id) const;

    // Appends new literal tokens after the existing ids; existing ids and the
    // tokenization of strings not containing the new tokens are unchanged.
    // Returns the number of ids added. Throws ConflictError listing every
    // duplicate (against the vocab or within the new list).
    int extend_vocabulary(const std::vector<std::string>& new_tokens);

    void save(const std::filesystem::path& file) const;
    static Tokenizer load(const std::filesystem::path& file);

    // Greedy byte-pair training on a TextOnly corpus: repeatedly merge the
    // most frequent adjacent pair until `target_vocab` ids exist or no pair
    // occurs twice. Ties break to the pair seen earliest in the corpus scan,
    // then lexicographically.
    static Tokenizer train_bpe(const Dataset& corpus, int target_vocab);

  private:
    std::vector<std::int32_t> bpe_encode(std::string_view segment) const;

    std::vector<std::string> vocab_;
    std::vector<Merge> merges_;
    std::vector<std::int32_t> literals_;
    std::int32_t bos_ = 256;
    std::int32_t eos_ = 257;
    std::int32_t pad_ = 258;
};

}  // namespace lmkit
