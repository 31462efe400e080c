#include "lmkit/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "lmkit/errors.hpp"

namespace lmkit {

using nlohmann::json;

Tokenizer::Tokenizer() {
    vocab_.reserve(kBaseVocab);
    for (int b = 0; b < kByteTokens; ++b) {
        vocab_.push_back(std::string(1, static_cast<char>(static_cast<unsigned char>(b))));
    }
    vocab_.push_back("<bos>");
    vocab_.push_back("<eos>");
    vocab_.push_back("<pad>");
}

const std::string& Tokenizer::piece(std::int32_t id) const {
    if (id < 0 || id >= vocab_size()) {
        throw IndexError("tokenizer: id " + std::to_string(id) + " out of range");
    }
    return vocab_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> Tokenizer::bpe_encode(std::string_view segment) const {
    std::vector<std::int32_t> ids;
    ids.reserve(segment.size());
    for (unsigned char c : segment) ids.push_back(static_cast<std::int32_t>(c));
    for (const Merge& m : merges_) {
        if (ids.size() < 2) break;
        std::vector<std::int32_t> out;
        out.reserve(ids.size());
        std::size_t i = 0;
        while (i < ids.size()) {
            if (i + 1 < ids.size() && ids[i] == m.left && ids[i + 1] == m.right) {
                out.push_back(m.result);
                i += 2;
            } else {
                out.push_back(ids[i]);
                i += 1;
            }
        }
        ids = std::move(out);
    }
    return ids;
}

std::vector<std::int32_t> Tokenizer::tokenize(std::string_view text) const {
    if (literals_.empty()) return bpe_encode(text);

    // Longest-match literal scan; the gaps between matches go through BPE.
    std::vector<std::int32_t> by_len = literals_;
    std::sort(by_len.begin(), by_len.end(), [&](std::int32_t a, std::int32_t b) {
        return vocab_[static_cast<std::size_t>(a)].size() >
               vocab_[static_cast<std::size_t>(b)].size();
    });

    std::vector<std::int32_t> ids;
    std::size_t seg_start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        std::int32_t matched = -1;
        for (std::int32_t id : by_len) {
            const std::string& tok = vocab_[static_cast<std::size_t>(id)];
            if (text.substr(i, tok.size()) == tok) {
                matched = id;
                break;
            }
        }
        if (matched >= 0) {
            auto seg = bpe_encode(text.substr(seg_start, i - seg_start));
            ids.insert(ids.end(), seg.begin(), seg.end());
            ids.push_back(matched);
            i += vocab_[static_cast<std::size_t>(matched)].size();
            seg_start = i;
        } else {
            ++i;
        }
    }
    auto seg = bpe_encode(text.substr(seg_start));
    ids.insert(ids.end(), seg.begin(), seg.end());
    return ids;
}

std::string Tokenizer::detokenize(std::span<const std::int32_t> ids) const {
    std::string out;
    for (std::int32_t id : ids) out += piece(id);
    return out;
}

int Tokenizer::extend_vocabulary(const std::vector<std::string>& new_tokens) {
    std::vector<std::string> duplicates;
    std::vector<std::string> seen;
    for (const std::string& t : new_tokens) {
        if (t.empty()) throw ConfigError("extend_vocabulary: empty token");
        const bool in_vocab = std::find(vocab_.begin(), vocab_.end(), t) != vocab_.end();
        const bool in_batch = std::find(seen.begin(), seen.end(), t) != seen.end();
        if (in_vocab || in_batch) {
            duplicates.push_back(t);
        } else {
            seen.push_back(t);
        }
    }
    if (!duplicates.empty()) {
        std::string msg = "extend_vocabulary: duplicate tokens:";
        for (const std::string& d : duplicates) msg += " \"" + d + "\"";
        throw ConflictError(msg);
    }
    for (const std::string& t : new_tokens) {
        literals_.push_back(static_cast<std::int32_t>(vocab_.size()));
        vocab_.push_back(t);
    }
    return static_cast<int>(new_tokens.size());
}

void Tokenizer::save(const std::filesystem::path& file) const {
    json root;
    root["version"] = 1;
    json vocab = json::array();
    for (const std::string& tok : vocab_) {
        json bytes = json::array();
        for (unsigned char c : tok) bytes.push_back(static_cast<int>(c));
        vocab.push_back(std::move(bytes));
    }
    root["vocab"] = std::move(vocab);
    json merges = json::array();
    for (const Merge& m : merges_) merges.push_back({m.left, m.right, m.result});
    root["merges"] = std::move(merges);
    root["special"] = {{"bos", bos_}, {"eos", eos_}, {"pad", pad_}};
    root["literals"] = literals_;
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write tokenizer file: " + file.string());
    out << root.dump() << "\n";
}

Tokenizer Tokenizer::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot read tokenizer file: " + file.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(file.string() + ": malformed tokenizer JSON (" + std::string(e.what()) +
                          ")");
    }
    if (!root.is_object() || !root.contains("version")) {
        throw FormatError(file.string() + ": not a tokenizer file");
    }
    if (root["version"].get<int>() != 1) {
        throw VersionError(file.string() + ": unsupported tokenizer version");
    }
    Tokenizer tok;
    tok.vocab_.clear();
    for (const json& entry : root.at("vocab")) {
        std::string s;
        for (const json& b : entry) s.push_back(static_cast<char>(b.get<int>()));
        tok.vocab_.push_back(std::move(s));
    }
    if (static_cast<int>(tok.vocab_.size()) < kBaseVocab) {
        throw FormatError(file.string() + ": vocab smaller than the byte+special base");
    }
    tok.merges_.clear();
    for (const json& entry : root.at("merges")) {
        Merge m{entry.at(0).get<std::int32_t>(), entry.at(1).get<std::int32_t>(),
                entry.at(2).get<std::int32_t>()};
        if (m.result < 0 || m.result >= static_cast<std::int32_t>(tok.vocab_.size())) {
            throw FormatError(file.string() + ": merge result id out of range");
        }
        tok.merges_.push_back(m);
    }
    const json& sp = root.at("special");
    tok.bos_ = sp.at("bos").get<std::int32_t>();
    tok.eos_ = sp.at("eos").get<std::int32_t>();
    tok.pad_ = sp.at("pad").get<std::int32_t>();
    tok.literals_ = root.value("literals", std::vector<std::int32_t>{});
    for (std::int32_t id : tok.literals_) {
        if (id < 0 || id >= static_cast<std::int32_t>(tok.vocab_.size())) {
            throw FormatError(file.string() + ": literal id out of range");
        }
    }
    return tok;
}

Tokenizer Tokenizer::train_bpe(const Dataset& corpus, int target_vocab) {
    if (corpus.kind != DatasetKind::TextOnly) {
        throw ConfigError("train_bpe: corpus must be a text_only dataset");
    }
    if (target_vocab < kBaseVocab) {
        throw ConfigError("train_bpe: target vocab must be at least " +
                          std::to_string(kBaseVocab) + " (256 bytes + 3 specials)");
    }
    if (corpus.texts.empty()) throw DegenerateInputError("train_bpe: empty corpus");

    Tokenizer tok;
    std::vector<std::vector<std::int32_t>> seqs;
    seqs.reserve(corpus.texts.size());
    bool any_bytes = false;
    for (const TextInstance& t : corpus.texts) {
        std::vector<std::int32_t> ids;
        ids.reserve(t.text.size());
        for (unsigned char c : t.text) ids.push_back(static_cast<std::int32_t>(c));
        any_bytes = any_bytes || !ids.empty();
        seqs.push_back(std::move(ids));
    }
    if (!any_bytes) throw DegenerateInputError("train_bpe: corpus contains no bytes");

    struct PairStat {
        std::int64_t count = 0;
        std::int64_t first_seen = 0;
    };

    while (static_cast<int>(tok.vocab_.size()) < target_vocab) {
        std::map<std::pair<std::int32_t, std::int32_t>, PairStat> stats;
        std::int64_t scan_rank = 0;
        for (const auto& seq : seqs) {
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                auto key = std::make_pair(seq[i], seq[i + 1]);
                auto [it, inserted] = stats.try_emplace(key);
                if (inserted) it->second.first_seen = scan_rank;
                it->second.count += 1;
                ++scan_rank;
            }
        }
        if (stats.empty()) break;

        auto better = [&](const auto& a, const auto& b) {
            // a, b are map entries; true if a wins.
            if (a.second.count != b.second.count) return a.second.count > b.second.count;
            if (a.second.first_seen != b.second.first_seen) {
                return a.second.first_seen < b.second.first_seen;
            }
            const auto& av = std::tie(tok.vocab_[static_cast<std::size_t>(a.first.first)],
                                      tok.vocab_[static_cast<std::size_t>(a.first.second)]);
            const auto& bv = std::tie(tok.vocab_[static_cast<std::size_t>(b.first.first)],
                                      tok.vocab_[static_cast<std::size_t>(b.first.second)]);
            return av < bv;
        };
        auto best = stats.begin();
        for (auto it = std::next(stats.begin()); it != stats.end(); ++it) {
            if (better(*it, *best)) best = it;
        }
        if (best->second.count < 2) break;  // no pair repeats

        const std::int32_t left = best->first.first;
        const std::int32_t right = best->first.second;
        const std::int32_t result = static_cast<std::int32_t>(tok.vocab_.size());
        tok.vocab_.push_back(tok.vocab_[static_cast<std::size_t>(left)] +
                             tok.vocab_[static_cast<std::size_t>(right)]);
        tok.merges_.push_back({left, right, result});

        for (auto& seq : seqs) {
            if (seq.size() < 2) continue;
            std::vector<std::int32_t> out;
            out.reserve(seq.size());
            std::size_t i = 0;
            while (i < seq.size()) {
                if (i + 1 < seq.size() && seq[i] == left && seq[i + 1] == right) {
                    out.push_back(result);
                    i += 2;
                } else {
                    out.push_back(seq[i]);
                    i += 1;
                }
            }
            seq = std::move(out);
        }
    }
    return tok;
}

}  // namespace lmkit
