#pragma once

#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "halo/backend.hpp"

namespace halo::testing {

// Wraps a backend and records every prompt it is asked to complete.
class RecordingBackend : public CompletionBackend {
 public:
  explicit RecordingBackend(const CompletionBackend& inner) : inner_(inner) {}

  Completion complete(const std::string& prompt,
                      const GenerationParams& params) const override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      prompts_.push_back(prompt);
    }
    return inner_.complete(prompt, params);
  }

  std::vector<std::string> prompts() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return prompts_;
  }

 private:
  const CompletionBackend& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> prompts_;
};

// Splits text into single-token-per-word entries with a fixed probability,
// preserving the leading-space convention of subword tokenizers.
inline std::vector<TokenLogprob> tokens_with_probability(
    const std::string& textv, double probability) {
  std::vector<TokenLogprob> tokens;
  std::string current;
  for (char c : textv) {
    if (c == ' ' && !current.empty()) {
      tokens.push_back({current, probability});
      current.clear();
    }
    current.push_back(c);
  }
  if (!current.empty()) tokens.push_back({current, probability});
  return tokens;
}

inline ScriptedBackend::Entry entry_with_tokens(
    std::string textv, std::vector<TokenLogprob> tokens) {
  ScriptedBackend::Entry e;
  e.text = std::move(textv);
  e.tokens = std::move(tokens);
  return e;
}

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace halo::testing
