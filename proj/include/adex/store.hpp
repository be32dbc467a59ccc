#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adex/engine.hpp"
#include "adex/errors.hpp"

namespace adex {

// One experiment per <id>.json under a single directory. Writes go through
// a temp file and a rename so a crash mid-save never leaves a torn snapshot.
class FileStore {
public:
    explicit FileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) {
            throw Error("store-unavailable",
                        "cannot create store directory " + dir_.string());
        }
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path path_for(const std::string& id) const {
        return dir_ / (id + ".json");
    }

    bool exists(const std::string& id) const {
        return valid_identifier(id) && std::filesystem::exists(path_for(id));
    }

    void save(const Experiment& experiment) const {
        const auto target = path_for(experiment.config().id);
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << experiment.snapshot().dump(2) << '\n';
            if (!out) {
                throw Error("store-write-failed",
                            "cannot write snapshot to " + tmp.string());
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, target, ec);
        if (ec) {
            throw Error("store-write-failed",
                        "cannot move snapshot into place at " + target.string());
        }
    }

    Experiment load(const std::string& id) const {
        if (!valid_identifier(id)) {
            throw ValidationError("invalid-experiment-id",
                                  "experiment id must be 1-128 chars of "
                                  "[A-Za-z0-9_.-]");
        }
        std::ifstream in(path_for(id), std::ios::binary);
        if (!in) {
            throw ValidationError("unknown-experiment",
                                  "no experiment '" + id + "' in the store");
        }
        nlohmann::json snap;
        try {
            in >> snap;
        } catch (const std::exception& e) {
            throw ValidationError("corrupt-snapshot", e.what());
        }
        auto experiment = Experiment::restore(snap);
        if (experiment.config().id != id) {
            throw ValidationError("corrupt-snapshot",
                                  "snapshot id does not match file name");
        }
        return experiment;
    }

    std::vector<std::string> list() const {
        std::vector<std::string> ids;
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            if (!entry.is_regular_file()) continue;
            const auto& p = entry.path();
            if (p.extension() != ".json") continue;
            ids.push_back(p.stem().string());
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    }

private:
    std::filesystem::path dir_;
};

}  // namespace adex
