#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace maple::agents {

struct PromptError : std::runtime_error {
  explicit PromptError(const std::string& detail)
      : std::runtime_error("prompt error: " + detail) {}
};

// Versioned template files, one per agent role, with ${placeholder}
// substitution. Unknown placeholders are an error so template drift is loud.
class PromptLibrary {
 public:
  PromptLibrary();
  explicit PromptLibrary(std::string dir);

  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& vars) const;
  const std::string& raw(const std::string& name) const;
  const std::string& dir() const { return dir_; }

  // MAPLE_PROMPT_DIR env override, else the build-time asset directory.
  static std::string default_dir();

 private:
  std::string dir_;
  mutable std::map<std::string, std::string> cache_;
};

std::string substitute(const std::string& tmpl,
                       const std::map<std::string, std::string>& vars);

}  // namespace maple::agents
