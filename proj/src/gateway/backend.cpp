#include "maple/gateway/backend.hpp"

#include <filesystem>
#include <mutex>

#include <nlohmann/json.hpp>

#include "maple/util/fsio.hpp"

namespace maple::gateway {

namespace fs = std::filesystem;

std::string archive_file_for_key(const std::string& key) {
  std::string safe;
  for (const char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    safe += ok ? c : '_';
  }
  return safe + ".json";
}

namespace {

void save_archive(const std::map<std::string, std::string>& archive,
                  const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& [key, text] : archive) {
    const nlohmann::json doc{{"version", 1}, {"key", key}, {"response", text}};
    util::write_file((fs::path(dir) / archive_file_for_key(key)).string(),
                     doc.dump(2) + "\n");
  }
}

}  // namespace

ReplayBackend::ReplayBackend(const std::string& archive_dir) { load(archive_dir); }

ModelResponse ReplayBackend::complete(const ModelRequest& req) {
  const std::string key = replay_key(req);
  const auto it = archive_.find(key);
  if (it == archive_.end()) throw ReplayMissError(key);
  ModelResponse resp;
  resp.text = it->second;
  resp.backend = name();
  return resp;
}

void ReplayBackend::put(const std::string& key, const std::string& text) {
  archive_[key] = text;
}

void ReplayBackend::load(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw TransportError("replay archive '" + dir + "' is not a directory");
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const auto doc = nlohmann::json::parse(util::read_file(entry.path().string()));
    archive_[doc.at("key").get<std::string>()] = doc.at("response").get<std::string>();
  }
}

void ReplayBackend::save(const std::string& dir) const { save_archive(archive_, dir); }

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> inner,
                                   std::string archive_dir)
    : inner_(std::move(inner)), archive_dir_(std::move(archive_dir)) {}

RecordingBackend::~RecordingBackend() {
  try {
    flush();
  } catch (...) {
    // destructor must not throw; an explicit flush() reports failures
  }
}

ModelResponse RecordingBackend::complete(const ModelRequest& req) {
  ModelResponse resp = inner_->complete(req);
  std::lock_guard<std::mutex> lock(mutex_);
  archive_[replay_key(req)] = resp.text;
  return resp;
}

void RecordingBackend::flush() const {
  std::lock_guard<std::mutex> lock(mutex_);
  save_archive(archive_, archive_dir_);
}

void ScriptedBackend::on_tag_prefix(std::string prefix, Handler handler) {
  handlers_.emplace_back(std::move(prefix), std::move(handler));
}

ModelResponse ScriptedBackend::complete(const ModelRequest& req) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++calls_;
  for (const auto& [prefix, handler] : handlers_) {
    if (req.tag.rfind(prefix, 0) == 0) {
      ModelResponse resp;
      resp.text = handler(req);
      resp.backend = name();
      return resp;
    }
  }
  throw TransportError("scripted backend has no handler for tag '" + req.tag + "'");
}

}  // namespace maple::gateway
