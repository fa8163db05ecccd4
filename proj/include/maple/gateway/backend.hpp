#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "maple/gateway/model.hpp"

namespace maple::gateway {

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual ModelResponse complete(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Serves archived responses keyed by replay_key(); throws ReplayMissError on
// an absent key so drifted prompts surface instead of silently degrading.
// On disk an archive is a directory of JSON files, one exchange per key.
class ReplayBackend : public ModelBackend {
 public:
  ReplayBackend() = default;
  explicit ReplayBackend(const std::string& archive_dir);

  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return "replay"; }

  void put(const std::string& key, const std::string& text);
  bool contains(const std::string& key) const { return archive_.count(key) > 0; }
  std::size_t size() const { return archive_.size(); }

  void load(const std::string& dir);
  void save(const std::string& dir) const;

 private:
  std::map<std::string, std::string> archive_;
};

// Forwards to an inner backend and archives every exchange.
class RecordingBackend : public ModelBackend {
 public:
  RecordingBackend(std::shared_ptr<ModelBackend> inner, std::string archive_dir);
  ~RecordingBackend() override;

  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return "recording(" + inner_->name() + ")"; }

  void flush() const;

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::string archive_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> archive_;
};

std::string archive_file_for_key(const std::string& key);

// Test stub: answers from a programmable tag-prefix table.
class ScriptedBackend : public ModelBackend {
 public:
  using Handler = std::function<std::string(const ModelRequest&)>;

  void on_tag_prefix(std::string prefix, Handler handler);
  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return "scripted"; }

  int calls() const { return calls_; }

 private:
  std::mutex mutex_;
  std::vector<std::pair<std::string, Handler>> handlers_;
  int calls_ = 0;
};

}  // namespace maple::gateway
