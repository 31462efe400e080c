#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmkit/data.hpp"
#include "lmkit/tokenizer.hpp"

namespace lmkit {

// Prompt rendering for supervised finetuning. The rendered sequence is
// prefix + input + infix + output + suffix + EOS; with loss_on_input=false the
// loss mask covers exactly the output+suffix+EOS span.
struct SftTemplate {
    std::string prefix = "###Input:\n";
    std::string infix = "\n###Output:\n";
    std::string suffix;
    bool loss_on_input = false;
};

struct SftExample {
    std::vector<std::int32_t> tokens;
    std::vector<std::uint8_t> mask;  // same length as tokens
};

std::string render_prompt(const SftTemplate& tmpl, std::string_view input);

// Tokenizes one instance. If the sequence exceeds `max_len`, tokens are
// dropped from the front of the prompt side only; the target span is never
// truncated (LengthError if it alone does not fit).
SftExample build_sft_example(const SftTemplate& tmpl, const PairInstance& inst,
                             const Tokenizer& tok, std::int64_t max_len);

}  // namespace lmkit
