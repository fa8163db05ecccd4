#include "maple/agents/prompts.hpp"

#include <cstdlib>
#include <filesystem>

#include "maple/util/fsio.hpp"

#ifndef MAPLE_ASSET_DIR
#define MAPLE_ASSET_DIR "assets"
#endif

namespace maple::agents {

std::string PromptLibrary::default_dir() {
  if (const char* env = std::getenv("MAPLE_PROMPT_DIR")) return env;
  return std::string(MAPLE_ASSET_DIR) + "/prompts";
}

PromptLibrary::PromptLibrary() : dir_(default_dir()) {}
PromptLibrary::PromptLibrary(std::string dir) : dir_(std::move(dir)) {}

const std::string& PromptLibrary::raw(const std::string& name) const {
  auto it = cache_.find(name);
  if (it == cache_.end()) {
    const auto path = std::filesystem::path(dir_) / (name + ".txt");
    if (!std::filesystem::exists(path)) {
      throw PromptError("missing template " + path.string());
    }
    it = cache_.emplace(name, util::read_file(path.string())).first;
  }
  return it->second;
}

std::string substitute(const std::string& tmpl,
                       const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("${", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    const auto close = tmpl.find('}', open + 2);
    if (close == std::string::npos) throw PromptError("unterminated placeholder");
    const std::string name = tmpl.substr(open + 2, close - open - 2);
    const auto it = vars.find(name);
    if (it == vars.end()) throw PromptError("unbound placeholder ${" + name + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
  return substitute(raw(name), vars);
}

}  // namespace maple::agents
