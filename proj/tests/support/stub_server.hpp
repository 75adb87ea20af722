#pragma once

// Local OpenAI-compatible server backed by the toy LM. Serves
// /v1/completions (echo + logprobs), /v1/chat/completions and /v1/embeddings.

#include <httplib.h>

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <thread>

#include "toy_lm.hpp"

namespace toy {

/// Chat reply for a user message, mimicking each prompt family the pipeline
/// sends: span filling, continuation, translation, judging, detection.
inline std::string chat_reply(const std::string& user, std::uint64_t seed) {
  const auto body_at = user.find("\n\n");
  const std::string body = body_at == std::string::npos ? user : user.substr(body_at + 2);

  if (user.find("<blank_") != std::string::npos) {
    static const std::regex blank(R"(<blank_(\d+)>)");
    std::string out;
    std::sregex_iterator it(body.begin(), body.end(), blank), end;
    std::size_t last = 0;
    for (; it != end; ++it) {
      out += body.substr(last, static_cast<std::size_t>(it->position()) - last);
      const auto h = aigt::mix_seed(seed, (*it)[1].str());
      out += "filler" + std::to_string(h % 97) + " word" + std::to_string((h >> 8) % 31);
      last = static_cast<std::size_t>(it->position() + it->length());
    }
    return out + body.substr(last);
  }
  if (user.rfind("Continue the following text", 0) == 0) {
    std::size_t n = 8;
    if (auto p = user.find("about "); p != std::string::npos) n = std::stoul(user.substr(p + 6));
    const auto words = tokenize(body);
    aigt::Rng rng(seed);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.empty()) out += ' ';
      if (!words.empty() && rng.uniform() < 0.7) {
        std::string w = words[rng.bounded(words.size())];
        w.erase(0, w.find_first_not_of(" \t\n"));
        out += w;
      } else {
        out += "novel" + std::to_string(rng.bounded(50));
      }
    }
    return out;
  }
  if (user.rfind("Translate the following text", 0) == 0) {
    static const std::string tag = "[pivot] ";
    if (body.rfind(tag, 0) == 0) {
      std::string back = body.substr(tag.size());
      if (auto p = back.find(" the "); p != std::string::npos) back.replace(p, 5, " this ");
      return back;
    }
    return tag + body;
  }
  if (user.find("specificity") != std::string::npos && user.find("grounding") != std::string::npos) {
    const auto h = aigt::fnv1a64(user);
    return "{\"specificity\": " + std::to_string(1 + h % 5) + ", \"grounding\": " + std::to_string(1 + (h >> 8) % 5) +
           ", \"coherence\": " + std::to_string(1 + (h >> 16) % 5) + "}";
  }
  // Detection / teaching: vote by the share of predictable words.
  const auto text_at = user.rfind("Text:\n");
  const std::string passage = text_at == std::string::npos ? body : user.substr(text_at + 6);
  std::size_t vowel = 0, total = 0;
  for (const auto& t : tokenize(passage)) {
    const auto w = t.find_first_not_of(" \t\n");
    if (w == std::string::npos) continue;
    ++total;
    vowel += std::string_view("aeiou").find(t[w]) != std::string_view::npos;
  }
  const bool ai = total > 0 && 2 * vowel > total;
  const std::string verdict = ai ? "AI" : "HUMAN";
  if (user.find("\"rationale\"") == std::string::npos) return "{\"verdict\": \"" + verdict + "\"}";
  const std::string why = ai ? "First, the phrasing is smooth and uniform. Therefore the text is AI-generated."
                             : "First, the text has idiosyncratic detail. Therefore it was written by a human.";
  return "{\n  \"rationale\": \"" + why + "\",\n  \"verdict\": \"" + verdict + "\"\n}";
}

class StubServer {
 public:
  StubServer() {
    server_.Post(R"(.*/completions)", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.path.find("/chat/") != std::string::npos) return chat(req, res);
      if (fault(res)) return;
      const auto j = aigt::json::parse(req.body);
      res.set_content(completions_body(j.at("prompt").get<std::string>(), j.value("logprobs", 5)).dump(),
                      "application/json");
    });
    server_.Post(R"(.*/embeddings)", [this](const httplib::Request& req, httplib::Response& res) {
      if (fault(res)) return;
      const auto j = aigt::json::parse(req.body);
      aigt::json body{{"data", {{{"index", 0}, {"embedding", embedding(j.at("input").get<std::string>())}}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::uint64_t requests() const { return requests_; }

  /// The next `n` requests answer with `status`.
  void fail_next(int n, int status = 503) {
    std::lock_guard lock(mutex_);
    failures_ = n;
    failure_status_ = status;
  }

  /// Replies verbatim whenever the user message contains `needle`.
  void script(std::string needle, std::string reply) {
    std::lock_guard lock(mutex_);
    scripted_[std::move(needle)] = std::move(reply);
  }

 private:
  bool fault(httplib::Response& res) {
    ++requests_;
    std::lock_guard lock(mutex_);
    if (failures_ > 0) {
      --failures_;
      res.status = failure_status_;
      res.set_content("{\"error\": \"injected\"}", "application/json");
      return true;
    }
    return false;
  }

  void chat(const httplib::Request& req, httplib::Response& res) {
    if (fault(res)) return;
    const auto j = aigt::json::parse(req.body);
    const auto user = j.at("messages").back().at("content").get<std::string>();
    std::string reply;
    bool found = false;
    {
      std::lock_guard lock(mutex_);
      for (const auto& [needle, r] : scripted_) {
        if (user.find(needle) != std::string::npos) {
          reply = r;
          found = true;
          break;
        }
      }
    }
    if (!found) reply = chat_reply(user, j.value("seed", std::uint64_t{0}));
    aigt::json body{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}}}}};
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::uint64_t> requests_{0};
  std::mutex mutex_;
  int failures_ = 0;
  int failure_status_ = 503;
  std::map<std::string, std::string> scripted_;
};

}  // namespace toy
