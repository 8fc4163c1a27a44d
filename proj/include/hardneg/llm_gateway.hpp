#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/util.hpp"

namespace hardneg::llm {

enum class Role { kSystem, kUser, kAssistant };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistant;
  throw ParseError("unknown chat role '" + std::string(s) + "'");
}

struct ChatMessage {
  Role role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using Clock = std::function<std::chrono::steady_clock::time_point()>;

inline void real_sleep(std::chrono::milliseconds d) {
  std::this_thread::sleep_for(d);
}
inline std::chrono::steady_clock::time_point real_now() {
  return std::chrono::steady_clock::now();
}

// ---------------------------------------------------------------------------
// Backend configuration

struct BackendConfig {
  enum class Kind { kHttp, kMock };

  Kind kind = Kind::kMock;
  // http
  std::string endpoint;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
  int max_retries = 4;  // five attempts in total
  std::chrono::milliseconds retry_backoff{500};
  size_t max_concurrency = 4;
  double requests_per_second = 0.0;  // 0 disables the token bucket
  // mock
  std::string script;
  // sampling
  double generation_temperature = 1.0;
  double verification_temperature = 0.0;

  void validate() const {
    if (kind == Kind::kHttp) {
      if (endpoint.empty())
        throw ConfigError("http backend requires 'endpoint'");
      if (model.empty()) throw ConfigError("http backend requires 'model'");
      if (max_retries < 0) throw ConfigError("'max-retries' must be >= 0");
      if (timeout.count() <= 0) throw ConfigError("'timeout-ms' must be positive");
      if (max_concurrency == 0)
        throw ConfigError("'max-concurrency' must be >= 1");
      if (requests_per_second < 0)
        throw ConfigError("'requests-per-second' must be >= 0");
    } else if (script.empty()) {
      throw ConfigError("mock backend requires 'script'");
    }
    if (generation_temperature < 0 || verification_temperature < 0)
      throw ConfigError("temperatures must be >= 0");
  }

  /// Secret-free description used for run manifests and config hashes.
  Json to_json() const {
    Json j;
    j["kind"] = kind == Kind::kHttp ? "http" : "mock";
    if (kind == Kind::kHttp) {
      j["endpoint"] = endpoint;
      j["model"] = model;
      j["api_key_env"] = api_key_env;
      j["timeout_ms"] = timeout.count();
      j["max_retries"] = max_retries;
      j["max_concurrency"] = max_concurrency;
      j["requests_per_second"] = requests_per_second;
      j["retry_backoff_ms"] = retry_backoff.count();
    } else {
      j["script"] = script;
    }
    j["generation_temperature"] = generation_temperature;
    j["verification_temperature"] = verification_temperature;
    return j;
  }
};

inline BackendConfig::Kind parse_backend_kind(std::string_view s) {
  if (s == "http") return BackendConfig::Kind::kHttp;
  if (s == "mock") return BackendConfig::Kind::kMock;
  throw ConfigError("unknown backend '" + std::string(s) +
                    "' (expected http or mock)");
}

// ---------------------------------------------------------------------------
// Backends

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Returns the raw assistant reply for the full transcript `messages`.
  virtual std::string complete(std::string_view conversation_id,
                               std::span<const ChatMessage> messages,
                               double temperature) = 0;

  /// True when replies depend on request order across conversations, so
  /// callers must issue requests sequentially to stay reproducible.
  virtual bool order_sensitive() const { return false; }
};

struct MockEntry {
  std::optional<std::string> match;
  std::string reply;
  std::optional<std::string> conversation;

  bool operator==(const MockEntry&) const = default;
};

inline Json mock_entry_to_json(const MockEntry& e) {
  Json j;
  if (e.conversation) j["conversation"] = *e.conversation;
  if (e.match) j["match"] = *e.match;
  j["reply"] = e.reply;
  return j;
}

/// Scripted backend. Entries tagged with a conversation id are served only to
/// that conversation; untagged entries form one shared queue. Each request
/// consumes the next entry of its conversation's queue, falling back to the
/// shared queue, and fails if the entry's `match` is not a substring of the
/// latest user turn.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(std::vector<MockEntry> script) {
    for (auto& e : script) {
      if (trim_view(e.reply).empty())
        throw ScriptError("mock script: reply must be non-empty");
      if (e.conversation)
        keyed_[*e.conversation].push_back(std::move(e));
      else
        shared_.push_back(std::move(e));
    }
  }

  /// Accepts a JSON array of entries or JSON Lines with one entry per line.
  static std::vector<MockEntry> parse_script(std::string_view text,
                                             const std::string& source) {
    std::vector<MockEntry> out;
    auto take = [&](const Json& j, const std::string& where) {
      if (!j.is_object()) throw ParseError(where + ": expected an object");
      MockEntry e;
      e.reply = require_string(j, "reply", where);
      if (j.contains("match")) e.match = require_string(j, "match", where);
      if (j.contains("conversation"))
        e.conversation = require_string(j, "conversation", where);
      out.push_back(std::move(e));
    };
    const auto body = trim_view(text);
    if (!body.empty() && body.front() == '[') {
      Json arr;
      try {
        arr = Json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source + ": invalid JSON (" + e.what() + ")");
      }
      for (size_t i = 0; i < arr.size(); ++i)
        take(arr[i], source + ": entry " + std::to_string(i));
    } else {
      for_each_jsonl(text, source, [&](const Json& j, size_t line) {
        take(j, source + ":" + std::to_string(line));
      });
    }
    return out;
  }

  std::string complete(std::string_view conversation_id,
                       std::span<const ChatMessage> messages,
                       double /*temperature*/) override {
    std::lock_guard lock(mu_);
    std::deque<MockEntry>* queue = &shared_;
    if (auto it = keyed_.find(std::string(conversation_id));
        it != keyed_.end() && !it->second.empty())
      queue = &it->second;
    if (queue->empty())
      throw ScriptError("mock script exhausted (conversation '" +
                        std::string(conversation_id) + "')");
    const std::string last_user = last_user_turn(messages);
    MockEntry& next = queue->front();
    if (next.match && last_user.find(*next.match) == std::string::npos)
      throw ScriptError("mock script mismatch in conversation '" +
                        std::string(conversation_id) + "': expected a turn containing '" +
                        *next.match + "', got '" + last_user + "'");
    std::string reply = std::move(next.reply);
    queue->pop_front();
    ++served_;
    return reply;
  }

  bool order_sensitive() const override { return !shared_.empty(); }

  size_t remaining() const {
    std::lock_guard lock(mu_);
    size_t n = shared_.size();
    for (const auto& [_, q] : keyed_) n += q.size();
    return n;
  }

  size_t served() const {
    std::lock_guard lock(mu_);
    return served_;
  }

 private:
  static std::string last_user_turn(std::span<const ChatMessage> messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
      if (it->role == Role::kUser) return it->content;
    return {};
  }

  mutable std::mutex mu_;
  std::deque<MockEntry> shared_;
  std::map<std::string, std::deque<MockEntry>> keyed_;
  size_t served_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{60000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Throws TransportError when no response was obtained.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Concurrent-request cap plus token-bucket rate limit shared by every HTTP
/// backend in the process.
class RequestLimiter {
 public:
  explicit RequestLimiter(size_t max_concurrency = 4, double rate = 0.0,
                          Clock clock = real_now, Sleeper sleeper = real_sleep)
      : max_concurrency_(max_concurrency),
        rate_(rate),
        tokens_(std::max(1.0, rate)),
        clock_(std::move(clock)),
        sleeper_(std::move(sleeper)),
        last_refill_(clock_()) {}

  static RequestLimiter& global() {
    static RequestLimiter limiter;
    return limiter;
  }

  void configure(size_t max_concurrency, double rate) {
    std::lock_guard lock(mu_);
    max_concurrency_ = std::max<size_t>(1, max_concurrency);
    rate_ = rate;
    tokens_ = std::max(1.0, rate);
    last_refill_ = clock_();
    cv_.notify_all();
  }

  class Permit {
   public:
    explicit Permit(RequestLimiter* owner) : owner_(owner) {}
    Permit(Permit&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release();
    }

   private:
    RequestLimiter* owner_;
  };

  Permit acquire() {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return in_flight_ < max_concurrency_; });
      ++in_flight_;
    }
    Permit permit(this);
    take_token();
    return permit;
  }

  size_t in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
  }

 private:
  void release() {
    std::lock_guard lock(mu_);
    --in_flight_;
    cv_.notify_one();
  }

  void take_token() {
    for (;;) {
      std::chrono::milliseconds wait{0};
      {
        std::lock_guard lock(bucket_mu_);
        if (rate_ <= 0.0) return;
        const auto now = clock_();
        const double elapsed =
            std::chrono::duration<double>(now - last_refill_).count();
        tokens_ = std::min(std::max(1.0, rate_), tokens_ + elapsed * rate_);
        last_refill_ = now;
        if (tokens_ >= 1.0) {
          tokens_ -= 1.0;
          return;
        }
        wait = std::chrono::milliseconds(
            static_cast<long>(std::ceil((1.0 - tokens_) / rate_ * 1000.0)));
      }
      sleeper_(wait);
    }
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  size_t max_concurrency_;
  size_t in_flight_ = 0;

  std::mutex bucket_mu_;
  double rate_;
  double tokens_;
  Clock clock_;
  Sleeper sleeper_;
  std::chrono::steady_clock::time_point last_refill_;
};

/// OpenAI-compatible chat-completion client with retries on timeouts, 429
/// and 5xx responses (exponential backoff: base, 2*base, 4*base, ...).
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(BackendConfig config, std::shared_ptr<HttpTransport> transport,
              RequestLimiter* limiter = &RequestLimiter::global(),
              Sleeper sleeper = real_sleep)
      : config_(std::move(config)),
        transport_(std::move(transport)),
        limiter_(limiter),
        sleeper_(std::move(sleeper)) {
    config_.validate();
  }

  static std::string request_body(const std::string& model,
                                  std::span<const ChatMessage> messages,
                                  double temperature) {
    Json j;
    j["model"] = model;
    Json msgs = Json::array();
    for (const auto& m : messages) {
      Json jm;
      jm["role"] = to_string(m.role);
      jm["content"] = m.content;
      msgs.push_back(std::move(jm));
    }
    j["messages"] = std::move(msgs);
    j["temperature"] = temperature;
    return j.dump();
  }

  static std::string parse_reply(const HttpResponse& r) {
    try {
      auto j = Json::parse(r.body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ApiError(r.status, std::string("malformed completion response: ") + e.what());
    }
  }

  std::string complete(std::string_view /*conversation_id*/,
                       std::span<const ChatMessage> messages,
                       double temperature) override {
    HttpRequest req;
    req.url = config_.endpoint;
    req.timeout = config_.timeout;
    req.body = request_body(config_.model, messages, temperature);
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
      req.headers.emplace_back("Authorization", std::string("Bearer ") + key);

    // Last retryable failure; status 0 means a transport error.
    int last_status = 0;
    std::string last_message;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        ++retries_;
        sleeper_(backoff(attempt - 1));
      }
      HttpResponse resp;
      try {
        auto permit = limiter_->acquire();
        resp = transport_->post(req);
      } catch (const TransportError& e) {
        last_status = 0;
        last_message = e.what();
        continue;
      }
      if (resp.status >= 200 && resp.status < 300) {
        auto reply = parse_reply(resp);
        if (trim_view(reply).empty())
          throw ApiError(resp.status, "empty completion");
        return reply;
      }
      last_status = resp.status;
      last_message = "chat completion failed with HTTP " +
                     std::to_string(resp.status) + ": " +
                     resp.body.substr(0, 300);
      if (resp.status != 429 && resp.status < 500)
        throw ApiError(resp.status, last_message);
    }
    const std::string suffix =
        " (after " + std::to_string(config_.max_retries + 1) + " attempts)";
    if (last_status != 0) throw ApiError(last_status, last_message + suffix);
    throw TransportError(last_message + suffix);
  }

  size_t retries() const { return retries_.load(); }

 private:
  std::chrono::milliseconds backoff(int retry_index) const {
    const auto cap = std::chrono::milliseconds(30000);
    auto d = config_.retry_backoff * (1LL << std::min(retry_index, 16));
    return std::min<std::chrono::milliseconds>(d, cap);
  }

  BackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  RequestLimiter* limiter_;
  Sleeper sleeper_;
  std::atomic<size_t> retries_{0};
};

// ---------------------------------------------------------------------------
// Conversations

/// A single-owner transcript: an optional system message followed by strictly
/// alternating user/assistant turns.
class Conversation {
 public:
  Conversation(std::string id, std::shared_ptr<ChatBackend> backend,
               std::string_view system_prompt)
      : id_(std::move(id)), backend_(std::move(backend)) {
    if (trim_view(system_prompt).empty())
      throw ArgumentError("system prompt must be non-empty");
    messages_.push_back({Role::kSystem, std::string(system_prompt)});
  }

  const std::string& id() const { return id_; }
  const std::vector<ChatMessage>& messages() const { return messages_; }

  /// Sends one user turn and returns the trimmed reply. On failure the user
  /// turn is rolled back, so the transcript stays well-formed.
  std::string send(std::string_view user_message, double temperature) {
    if (trim_view(user_message).empty())
      throw ArgumentError("user message must be non-empty");
    if (messages_.back().role == Role::kUser)
      throw ContractError("conversation '" + id_ + "' has a pending user turn");
    messages_.push_back({Role::kUser, std::string(user_message)});
    std::string reply;
    try {
      reply = trim(backend_->complete(id_, messages_, temperature));
    } catch (...) {
      messages_.pop_back();
      throw;
    }
    if (reply.empty()) {
      messages_.pop_back();
      throw ApiError(200, "empty reply in conversation '" + id_ + "'");
    }
    messages_.push_back({Role::kAssistant, reply});
    return reply;
  }

  std::string transcript_jsonl() const;

 private:
  std::string id_;
  std::shared_ptr<ChatBackend> backend_;
  std::vector<ChatMessage> messages_;
};

inline std::string transcript_jsonl(std::span<const ChatMessage> messages) {
  std::string out;
  for (const auto& m : messages) {
    Json j;
    j["role"] = to_string(m.role);
    j["content"] = m.content;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string Conversation::transcript_jsonl() const {
  return llm::transcript_jsonl(messages_);
}

inline bool well_formed(std::span<const ChatMessage> messages) {
  size_t i = 0;
  if (!messages.empty() && messages[0].role == Role::kSystem) i = 1;
  for (size_t k = i; k < messages.size(); ++k) {
    if (messages[k].content.empty()) return false;
    const Role expected = ((k - i) % 2 == 0) ? Role::kUser : Role::kAssistant;
    if (messages[k].role != expected) return false;
  }
  return true;
}

inline std::vector<ChatMessage> parse_transcript(std::string_view text,
                                                 const std::string& source) {
  std::vector<ChatMessage> out;
  for_each_jsonl(text, source, [&](const Json& j, size_t line) {
    const auto where = source + ":" + std::to_string(line);
    out.push_back({parse_role(require_string(j, "role", where)),
                   require_string(j, "content", where)});
  });
  return out;
}

/// Converts a recorded transcript into conversation-tagged mock entries that
/// reproduce its assistant turns in order.
inline std::vector<MockEntry> script_from_transcript(
    const std::string& conversation_id,
    std::span<const ChatMessage> messages) {
  std::vector<MockEntry> out;
  for (size_t i = 0; i + 1 < messages.size(); ++i) {
    if (messages[i].role == Role::kUser &&
        messages[i + 1].role == Role::kAssistant)
      out.push_back({messages[i].content, messages[i + 1].content,
                     conversation_id});
  }
  return out;
}

/// Owns one backend instance and hands out conversations bound to it.
class Gateway {
 public:
  Gateway(BackendConfig config, std::shared_ptr<ChatBackend> backend)
      : config_(std::move(config)), backend_(std::move(backend)) {
    config_.validate();
  }

  const BackendConfig& config() const { return config_; }
  const std::shared_ptr<ChatBackend>& backend() const { return backend_; }

  Conversation new_conversation(std::string_view system_prompt,
                                std::string id = {}) {
    if (id.empty()) id = "conv-" + std::to_string(next_id_++);
    return Conversation(std::move(id), backend_, system_prompt);
  }

 private:
  BackendConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  std::atomic<size_t> next_id_{0};
};

}  // namespace hardneg::llm
