#pragma once

// On-disk results store.
//
//   <root>/runs/<run id>/{result.json, events.jsonl, checkpoint.bin}
//   <root>/teachers/<key>.bin     pretrained teachers
//   <root>/datasets/<key>/        generated task splits
//   <root>/locks/<name>.lock      exclusive per-item locks
//
// The root is $REPROG_RESULTS_DIR, or ./results when unset.

#include <filesystem>
#include <string>
#include <vector>

#include "drd/serialization.hpp"

namespace drd {

inline constexpr int kSchemaVersion = 1;

// Blocking exclusive flock on a lock file; released on destruction.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path);
    ~FileLock();
    FileLock(FileLock&& other) noexcept;
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;
    FileLock& operator=(FileLock&&) = delete;

private:
    int fd_ = -1;
};

class ResultsStore {
public:
    explicit ResultsStore(std::filesystem::path root);
    static ResultsStore from_environment();

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path run_dir(const std::string& id) const;
    std::filesystem::path result_path(const std::string& id) const;
    std::filesystem::path events_path(const std::string& id) const;
    std::filesystem::path checkpoint_path(const std::string& id) const;
    std::filesystem::path teacher_path(const std::string& key) const;
    std::filesystem::path dataset_dir(const std::string& key) const;

    FileLock lock(const std::string& name) const;
    bool has_result(const std::string& id) const;
    std::vector<std::string> run_ids() const;

private:
    std::filesystem::path root_;
};

// Append-only JSONL stream. Every record carries schema_version and type.
class EventLog {
public:
    // Truncates `path` and writes the single header record.
    EventLog(std::filesystem::path path, const Json& header);
    void append(const std::string& type, Json body);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Reads every record of a JSONL file.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

// Write-to-temp then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace drd
