#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "lmkit/errors.hpp"

namespace lmkit {

enum class DatasetKind { TextOnly, Text2Text, Preference };

const char* dataset_kind_name(DatasetKind kind);

struct TextInstance {
    std::string text;
};

struct PairInstance {
    std::string input;
    std::string output;
};

struct PreferencePair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
};

// Typed view of one dataset directory. Exactly one of the instance vectors is
// populated, matching `kind`. `preference` is a toolkit extension beyond the
// two documented dataset types; the loader treats it like the others.
struct Dataset {
    DatasetKind kind = DatasetKind::TextOnly;
    std::vector<TextInstance> texts;
    std::vector<PairInstance> pairs;
    std::vector<PreferencePair> prefs;

    std::size_t size() const {
        switch (kind) {
            case DatasetKind::TextOnly: return texts.size();
            case DatasetKind::Text2Text: return pairs.size();
            case DatasetKind::Preference: return prefs.size();
        }
        return 0;
    }
};

// Parses every `*.json` file under `dir`, concatenated in lexicographic
// filename order. All files must carry the same `type`. Throws FormatError on
// any contract violation (never crashes on malformed input).
Dataset load_dataset(const std::filesystem::path& dir);

// Single-file parse; `label` names the file in error messages.
Dataset parse_dataset_json(const std::string& text, const std::string& label);

// Writes one dataset as a single .json file in the on-disk format.
void save_dataset(const Dataset& ds, const std::filesystem::path& file);

}  // namespace lmkit
