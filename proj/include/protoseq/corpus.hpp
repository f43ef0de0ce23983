#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace protoseq {

struct Message {
  std::string speaker;
  std::string text;
  std::vector<std::string> tokens;
  std::string label;
};

struct Conversation {
  std::string id;
  std::vector<Message> messages;
  std::optional<int> satisfaction;  // conversation-level score in [-3, 3]
};

struct Corpus {
  std::vector<Conversation> conversations;
  std::vector<std::string> label_set;  // sorted lexicographically, fixed indices
  std::unordered_map<std::string, int> label_index;
  std::string split;  // train / val / test tag, informational

  int label_id(const std::string& label) const {
    auto it = label_index.find(label);
    if (it == label_index.end()) throw std::invalid_argument("unknown label: " + label);
    return it->second;
  }

  std::size_t num_labels() const { return label_set.size(); }

  void rebuild_label_index() {
    std::vector<std::string> labels;
    for (const Conversation& c : conversations)
      for (const Message& m : c.messages) labels.push_back(m.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    label_set = std::move(labels);
    label_index.clear();
    for (std::size_t i = 0; i < label_set.size(); ++i) label_index[label_set[i]] = static_cast<int>(i);
  }
};

// Lowercased maximal alphanumeric runs plus single punctuation marks.
// Bytes >= 0x80 are treated as word characters so UTF-8 text stays intact.
// Empty or whitespace-only input yields the "<empty>" sentinel token.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) {
      tokens.push_back(run);
      run.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c >= 0x80 || std::isalnum(c)) {
      run.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  if (tokens.empty()) tokens.push_back("<empty>");
  return tokens;
}

struct CorpusLoadStats {
  std::size_t unknown_fields = 0;
};

namespace detail {

inline void count_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> known,
                               CorpusLoadStats* stats) {
  if (!stats) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) ++stats->unknown_fields;
  }
}

}  // namespace detail

// One conversation object per line:
// {"id": str, "messages": [{"speaker": str, "text": str, "tokens": [str]?,
//  "label": str}], "meta": {"satisfaction": int?}}
inline Corpus load_corpus(const std::string& path, CorpusLoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(lineno) + ": malformed json: " + e.what());
    }
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " + what);
    };
    if (!obj.is_object()) fail("expected a json object");
    detail::count_unknown_keys(obj, {"id", "messages", "meta"}, stats);
    if (!obj.contains("id") || !obj["id"].is_string()) fail("missing or non-string \"id\"");
    if (!obj.contains("messages") || !obj["messages"].is_array() || obj["messages"].empty())
      fail("missing or empty \"messages\"");

    Conversation conv;
    conv.id = obj["id"].get<std::string>();
    for (const nlohmann::json& mj : obj["messages"]) {
      if (!mj.is_object()) fail("message is not an object");
      detail::count_unknown_keys(mj, {"speaker", "text", "tokens", "label"}, stats);
      Message m;
      if (!mj.contains("label") || !mj["label"].is_string()) fail("message missing \"label\"");
      m.label = mj["label"].get<std::string>();
      if (!mj.contains("text") || !mj["text"].is_string()) fail("message missing \"text\"");
      m.text = mj["text"].get<std::string>();
      m.speaker = mj.value("speaker", std::string());
      if (mj.contains("tokens") && mj["tokens"].is_array() && !mj["tokens"].empty())
        m.tokens = mj["tokens"].get<std::vector<std::string>>();
      else
        m.tokens = tokenize(m.text);
      conv.messages.push_back(std::move(m));
    }
    if (obj.contains("meta") && obj["meta"].is_object()) {
      detail::count_unknown_keys(obj["meta"], {"satisfaction"}, stats);
      if (obj["meta"].contains("satisfaction")) conv.satisfaction = obj["meta"]["satisfaction"].get<int>();
    }
    corpus.conversations.push_back(std::move(conv));
  }
  corpus.rebuild_label_index();
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const Conversation& c : corpus.conversations) {
    nlohmann::json obj;
    obj["id"] = c.id;
    nlohmann::json msgs = nlohmann::json::array();
    for (const Message& m : c.messages) {
      nlohmann::json mj;
      mj["speaker"] = m.speaker;
      mj["text"] = m.text;
      mj["tokens"] = m.tokens;
      mj["label"] = m.label;
      msgs.push_back(std::move(mj));
    }
    obj["messages"] = std::move(msgs);
    if (c.satisfaction) obj["meta"] = {{"satisfaction", *c.satisfaction}};
    out << obj.dump() << "\n";
  }
}

// Masked fixed-length view over a conversation. Conversations longer than
// max_len keep their first max_len messages; shorter ones get masked tail
// positions that are excluded from loss, metrics and prototype construction.
struct PaddedConversation {
  const Conversation* conv = nullptr;
  std::size_t real_len = 0;
  std::size_t padded_len = 0;

  std::size_t mask_count() const { return padded_len - real_len; }
  bool is_masked(std::size_t i) const { return i >= real_len; }
  const Message& message(std::size_t i) const {
    if (i >= real_len) throw std::out_of_range("message index in masked region");
    return conv->messages[i];
  }
};

inline PaddedConversation pad_or_trim(const Conversation& conv, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("pad_or_trim: max_len must be >= 1");
  PaddedConversation view;
  view.conv = &conv;
  view.real_len = std::min(conv.messages.size(), max_len);
  view.padded_len = max_len;
  return view;
}

}  // namespace protoseq
