#include "reforce/llm.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "reforce/compression.hpp"

namespace reforce {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct FencedBlock {
  std::string tag;
  std::string body;
};

// Line-oriented scan: a fence opens on a line starting with ``` and closes on
// the next line that is exactly ``` after trimming.
std::vector<FencedBlock> fenced_blocks(const std::string& text) {
  std::vector<FencedBlock> blocks;
  std::istringstream in(text);
  std::string line;
  bool open = false;
  FencedBlock cur;
  std::string body;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (!open) {
      if (t.rfind("```", 0) == 0 && t.size() > 3) {
        cur.tag = lower(trim(t.substr(3)));
        body.clear();
        open = true;
      } else if (t == "```") {
        cur.tag.clear();
        body.clear();
        open = true;
      }
    } else {
      if (t == "```") {
        cur.body = body;
        blocks.push_back(cur);
        open = false;
      } else {
        body += line;
        body += '\n';
      }
    }
  }
  return blocks;
}

}  // namespace

void CostLedger::merge(const CostLedger& other) {
  llm_calls += other.llm_calls;
  db_calls += other.db_calls;
  prompt_tokens_total += other.prompt_tokens_total;
  per_call_tokens.insert(per_call_tokens.end(), other.per_call_tokens.begin(),
                         other.per_call_tokens.end());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::vector<std::string> extract_sql(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& b : fenced_blocks(text)) {
    if (b.tag == "sql") out.push_back(trim(b.body));
  }
  return out;
}

std::optional<StructuredAnswer> extract_structured(const std::string& text) {
  const auto blocks = fenced_blocks(text);
  const FencedBlock* last = nullptr;
  for (const auto& b : blocks) {
    if (b.tag == "json") last = &b;
  }
  if (last == nullptr) return std::nullopt;

  json parsed = json::parse(last->body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;

  StructuredAnswer ans;
  if (parsed.contains("think") && parsed["think"].is_string()) {
    ans.think = parsed["think"].get<std::string>();
  }
  if (!parsed.contains("answer") || !parsed["answer"].is_string()) return std::nullopt;
  std::string raw = trim(parsed["answer"].get<std::string>());
  if (raw.empty()) return std::nullopt;
  ans.answer = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(raw[0]))));
  if (parsed.contains("columns") && parsed["columns"].is_array()) {
    for (const auto& c : parsed["columns"]) {
      if (c.is_string()) ans.columns.push_back(c.get<std::string>());
    }
  }
  return ans;
}

// --- MockBackend ------------------------------------------------------------

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& script_path) {
  std::ifstream in(script_path);
  if (!in) throw BackendError("mock script not found: " + script_path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

std::shared_ptr<MockBackend> MockBackend::from_string(const std::string& jsonl) {
  auto mock = std::make_shared<MockBackend>();
  std::istringstream in(jsonl);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw BackendError("mock script parse error at line " + std::to_string(line_no));
    }
    Record r;
    if (rec.contains("when_contains")) {
      for (const auto& s : rec["when_contains"]) r.when_contains.push_back(s.get<std::string>());
    }
    if (rec.contains("respond")) r.respond = rec["respond"].get<std::string>();
    if (rec.contains("fail")) r.fail = rec["fail"].get<bool>();
    mock->records_.push_back(std::move(r));
  }
  return mock;
}

Completion MockBackend::complete(const CompletionRequest& req) {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& r : records_) {
    if (r.consumed) continue;
    bool match = true;
    for (const auto& needle : r.when_contains) {
      if (req.prompt.find(needle) == std::string::npos) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    r.consumed = true;
    if (r.fail) throw TransportError("scripted transport failure");
    Completion c;
    c.text = r.respond;
    c.prompt_tokens = estimate_tokens(req.prompt);
    c.output_tokens = estimate_tokens(r.respond);
    c.backend_id = "mock";
    return c;
  }
  throw BackendError("mock script has no matching record for prompt (sha256 " +
                     sha256_hex(req.prompt).substr(0, 12) + ")");
}

std::size_t MockBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t n = 0;
  for (const auto& r : records_) {
    if (!r.consumed) ++n;
  }
  return n;
}

// --- LlmGateway ---------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, int max_retries,
                       std::chrono::milliseconds backoff_base)
    : backend_(std::move(backend)), max_retries_(max_retries), backoff_base_(backoff_base) {}

Completion LlmGateway::complete(const CompletionRequest& req, CostLedger& ledger,
                                const CallContext& ctx) {
  Completion c;
  int attempt = 0;
  for (;;) {
    try {
      c = backend_->complete(req);
      break;
    } catch (const TransportError&) {
      if (attempt >= max_retries_) throw;
      auto delay = backoff_base_ * (1 << attempt);
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      ++attempt;
    }
  }
  if (c.prompt_tokens == 0) c.prompt_tokens = estimate_tokens(req.prompt);

  ledger.llm_calls += 1;
  ledger.prompt_tokens_total += c.prompt_tokens;
  ledger.per_call_tokens.push_back(c.prompt_tokens);
  total_calls_.fetch_add(1, std::memory_order_relaxed);

  std::function<void(const CallRecord&)> sink;
  {
    std::lock_guard<std::mutex> lock(sink_mu_);
    sink = sink_;
  }
  if (sink) {
    CallRecord rec;
    rec.instance_id = ctx.instance_id;
    rec.phase = ctx.phase;
    rec.prompt_sha256 = sha256_hex(req.prompt);
    rec.prompt_tokens = c.prompt_tokens;
    rec.output_tokens = c.output_tokens;
    sink(rec);
  }
  return c;
}

CompletionRequest LlmGateway::make_request(std::string prompt) const {
  CompletionRequest req;
  req.prompt = std::move(prompt);
  req.model = default_model_;
  req.temperature = default_temperature_;
  return req;
}

void LlmGateway::set_request_defaults(std::string model, double temperature) {
  default_model_ = std::move(model);
  default_temperature_ = temperature;
}

void LlmGateway::set_call_sink(std::function<void(const CallRecord&)> sink) {
  std::lock_guard<std::mutex> lock(sink_mu_);
  sink_ = std::move(sink);
}

// --- HttpBackend ------------------------------------------------------------

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::string model)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {}

std::shared_ptr<HttpBackend> HttpBackend::from_env() {
  const char* url = std::getenv("REFORCE_BASE_URL");
  const char* key = std::getenv("REFORCE_API_KEY");
  const char* model = std::getenv("REFORCE_MODEL");
  if (url == nullptr) throw BackendError("REFORCE_BASE_URL not set and no backend configured");
  return std::make_shared<HttpBackend>(url, key ? key : "", model ? model : "");
}

}  // namespace reforce

// httplib pulls in system socket headers; keep it out of the header and the
// anonymous namespace above.
#include "httplib.h"

namespace reforce {

Completion HttpBackend::complete(const CompletionRequest& req) {
  using nlohmann::json;

  std::string host = base_url_;
  std::string prefix;
  auto scheme_end = host.find("://");
  std::size_t path_start = host.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    prefix = host.substr(path_start);
    host = host.substr(0, path_start);
  }
  if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  json body = {
      {"model", req.model.empty() ? model_ : req.model},
      {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
      {"temperature", req.temperature},
      {"max_tokens", req.max_output_tokens},
  };

  httplib::Client client(host);
  client.set_read_timeout(600, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw TransportError("http transport failure against " + base_url_);
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("http status " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendError("http status " + std::to_string(res->status) + ": " + res->body);
  }

  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
    throw BackendError("malformed completion response");
  }
  Completion c;
  c.text = parsed["choices"][0]["message"]["content"].get<std::string>();
  if (parsed.contains("usage")) {
    c.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
    c.output_tokens = parsed["usage"].value("completion_tokens", 0);
  }
  c.backend_id = id();
  return c;
}

}  // namespace reforce
