#include "drd/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "drd/error.hpp"

namespace drd {

namespace fs = std::filesystem;

FileLock::FileLock(const fs::path& path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        fail(ErrorKind::io, "cannot open lock file " + path.string());
    }
    if (::flock(fd_, LOCK_EX) != 0) {
        ::close(fd_);
        fail(ErrorKind::io, "cannot lock " + path.string());
    }
}

FileLock::FileLock(FileLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

FileLock::~FileLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

ResultsStore::ResultsStore(fs::path root) : root_(std::move(root)) {}

ResultsStore ResultsStore::from_environment() {
    const char* env = std::getenv("REPROG_RESULTS_DIR");
    return ResultsStore(env != nullptr && *env != '\0' ? fs::path(env) : fs::path("results"));
}

fs::path ResultsStore::run_dir(const std::string& id) const { return root_ / "runs" / id; }
fs::path ResultsStore::result_path(const std::string& id) const { return run_dir(id) / "result.json"; }
fs::path ResultsStore::events_path(const std::string& id) const { return run_dir(id) / "events.jsonl"; }
fs::path ResultsStore::checkpoint_path(const std::string& id) const { return run_dir(id) / "checkpoint.bin"; }
fs::path ResultsStore::teacher_path(const std::string& key) const { return root_ / "teachers" / (key + ".bin"); }
fs::path ResultsStore::dataset_dir(const std::string& key) const { return root_ / "datasets" / key; }

FileLock ResultsStore::lock(const std::string& name) const { return FileLock(root_ / "locks" / (name + ".lock")); }

bool ResultsStore::has_result(const std::string& id) const { return fs::exists(result_path(id)); }

std::vector<std::string> ResultsStore::run_ids() const {
    std::vector<std::string> ids;
    if (!fs::exists(root_ / "runs")) {
        return ids;
    }
    for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
        if (fs::exists(entry.path() / "result.json")) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

EventLog::EventLog(fs::path path, const Json& header) : path_(std::move(path)) {
    fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::trunc);
    if (!out) {
        fail(ErrorKind::io, "cannot write " + path_.string());
    }
    Json record = header;
    record["schema_version"] = kSchemaVersion;
    record["type"] = "header";
    out << record.dump() << '\n';
}

void EventLog::append(const std::string& type, Json body) {
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        fail(ErrorKind::io, "cannot append to " + path_.string());
    }
    body["schema_version"] = kSchemaVersion;
    body["type"] = type;
    out << body.dump() << '\n';
}

std::vector<Json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::not_found, "cannot open " + path.string());
    }
    std::vector<Json> records;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            records.push_back(Json::parse(line));
        }
    }
    return records;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        out << text;
        if (!out) {
            fail(ErrorKind::io, "cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

}  // namespace drd
