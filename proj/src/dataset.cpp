#include "lmkit/data.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace lmkit {

using nlohmann::json;

const char* dataset_kind_name(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::TextOnly: return "text_only";
        case DatasetKind::Text2Text: return "text2text";
        case DatasetKind::Preference: return "preference";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(const std::string& label, const std::string& what) {
    throw FormatError(label + ": " + what);
}

std::string require_string(const json& obj, const char* key, const std::string& label,
                           std::size_t index) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        fail(label, "instance " + std::to_string(index) + ": missing key \"" + key + "\"");
    }
    if (!it->is_string()) {
        fail(label, "instance " + std::to_string(index) + ": key \"" + key +
                        "\" must be a string");
    }
    return it->get<std::string>();
}

void require_exact_keys(const json& obj, const std::vector<std::string>& keys,
                        const std::string& label, std::size_t index) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
            fail(label, "instance " + std::to_string(index) + ": unknown key \"" + it.key() +
                            "\" for this dataset type");
        }
    }
}

}  // namespace

Dataset parse_dataset_json(const std::string& text, const std::string& label) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(label, "byte " + std::to_string(e.byte) + ": malformed JSON (" + e.what() + ")");
    }
    if (!root.is_object()) fail(label, "byte 0: top-level value must be an object");
    if (!root.contains("type")) fail(label, "byte 0: missing key \"type\"");
    if (!root.contains("instances")) fail(label, "byte 0: missing key \"instances\"");
    for (auto it = root.begin(); it != root.end(); ++it) {
        if (it.key() != "type" && it.key() != "instances") {
            fail(label, "unknown top-level key \"" + it.key() + "\"");
        }
    }
    if (!root["type"].is_string()) fail(label, "\"type\" must be a string");
    const std::string type = root["type"].get<std::string>();

    Dataset ds;
    if (type == "text_only") {
        ds.kind = DatasetKind::TextOnly;
    } else if (type == "text2text") {
        ds.kind = DatasetKind::Text2Text;
    } else if (type == "preference") {
        ds.kind = DatasetKind::Preference;
    } else {
        fail(label, "unsupported dataset type \"" + type +
                        "\" (supported: text_only, text2text, preference)");
    }

    const json& instances = root["instances"];
    if (!instances.is_array()) fail(label, "\"instances\" must be an array");
    if (instances.empty()) fail(label, "\"instances\" must not be empty");

    for (std::size_t i = 0; i < instances.size(); ++i) {
        const json& inst = instances[i];
        if (!inst.is_object()) {
            fail(label, "instance " + std::to_string(i) + ": must be an object");
        }
        switch (ds.kind) {
            case DatasetKind::TextOnly:
                require_exact_keys(inst, {"text"}, label, i);
                ds.texts.push_back({require_string(inst, "text", label, i)});
                break;
            case DatasetKind::Text2Text:
                require_exact_keys(inst, {"input", "output"}, label, i);
                ds.pairs.push_back({require_string(inst, "input", label, i),
                                    require_string(inst, "output", label, i)});
                break;
            case DatasetKind::Preference: {
                require_exact_keys(inst, {"prompt", "chosen", "rejected"}, label, i);
                PreferencePair p{require_string(inst, "prompt", label, i),
                                 require_string(inst, "chosen", label, i),
                                 require_string(inst, "rejected", label, i)};
                if (p.chosen == p.rejected) {
                    fail(label, "instance " + std::to_string(i) +
                                    ": chosen and rejected are identical");
                }
                ds.prefs.push_back(std::move(p));
                break;
            }
        }
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir) || !fs::is_directory(dir)) {
        throw FormatError("dataset directory not found: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw FormatError("dataset directory contains no .json files: " + dir.string());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    Dataset out;
    std::string first_file;
    bool first = true;
    for (const fs::path& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw FormatError("cannot read dataset file: " + file.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        Dataset part = parse_dataset_json(buf.str(), file.filename().string());
        if (first) {
            out.kind = part.kind;
            first_file = file.filename().string();
            first = false;
        } else if (part.kind != out.kind) {
            throw FormatError("mixed dataset types: \"" + first_file + "\" has type " +
                              dataset_kind_name(out.kind) + " but \"" +
                              file.filename().string() + "\" has type " +
                              dataset_kind_name(part.kind));
        }
        out.texts.insert(out.texts.end(), part.texts.begin(), part.texts.end());
        out.pairs.insert(out.pairs.end(), part.pairs.begin(), part.pairs.end());
        out.prefs.insert(out.prefs.end(), part.prefs.begin(), part.prefs.end());
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& file) {
    json root;
    root["type"] = dataset_kind_name(ds.kind);
    json instances = json::array();
    switch (ds.kind) {
        case DatasetKind::TextOnly:
            for (const auto& t : ds.texts) instances.push_back({{"text", t.text}});
            break;
        case DatasetKind::Text2Text:
            for (const auto& p : ds.pairs) {
                instances.push_back({{"input", p.input}, {"output", p.output}});
            }
            break;
        case DatasetKind::Preference:
            for (const auto& p : ds.prefs) {
                instances.push_back(
                    {{"prompt", p.prompt}, {"chosen", p.chosen}, {"rejected", p.rejected}});
            }
            break;
    }
    root["instances"] = std::move(instances);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write dataset file: " + file.string());
    out << root.dump(2) << "\n";
}

}  // namespace lmkit
