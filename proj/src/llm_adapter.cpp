#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rebal/adaptation.hpp"

namespace rebal {

namespace {

// Counting gate for the in-flight request cap.
class RequestGate {
public:
    explicit RequestGate(int capacity) : capacity_(capacity) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < capacity_; });
        ++in_flight_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int capacity_;
    int in_flight_ = 0;
};

struct ScopedGate {
    explicit ScopedGate(RequestGate& gate) : gate_(gate) { gate_.acquire(); }
    ~ScopedGate() { gate_.release(); }
    RequestGate& gate_;
};

class LlmAdapter final : public Adapter {
public:
    explicit LlmAdapter(LlmAdapterConfig cfg)
        : cfg_(std::move(cfg)), gate_(std::max(1, cfg_.max_in_flight)) {
        if (cfg_.timeout_seconds <= 0)
            throw std::invalid_argument("llm adapter: timeout must be > 0");
        const char* key = std::getenv(cfg_.credential_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw std::runtime_error("llm adapter: credential environment variable " +
                                     cfg_.credential_env + " is not set");
        }
        credential_ = key;

        // Split "scheme://host[:port][/prefix]" into client base and path prefix.
        const size_t scheme = cfg_.endpoint.find("://");
        if (scheme == std::string::npos)
            throw std::invalid_argument("llm adapter: endpoint must include a scheme");
        const size_t path = cfg_.endpoint.find('/', scheme + 3);
        if (path == std::string::npos) {
            base_ = cfg_.endpoint;
        } else {
            base_ = cfg_.endpoint.substr(0, path);
            prefix_ = cfg_.endpoint.substr(path);
            while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        }
    }

    AdapterResult complete(const std::string& prompt) override {
        ScopedGate in_flight(gate_);

        const nlohmann::json body{
            {"model", cfg_.model},
            {"temperature", cfg_.temperature},
            {"messages", {{{"role", "user"}, {"content", prompt}}}}};
        const std::string payload = body.dump();
        const httplib::Headers headers{{"Authorization", "Bearer " + credential_}};
        const std::string path = prefix_ + "/chat/completions";

        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                const auto backoff =
                    std::chrono::milliseconds(250) * (1 << (attempt - 1));
                std::this_thread::sleep_for(backoff);
            }

            httplib::Client client(base_);
            const auto timeout = std::chrono::milliseconds(
                static_cast<long long>(cfg_.timeout_seconds * 1000.0));
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);

            auto res = client.Post(path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;  // connection-level failures are retryable
            }
            if (res->status == 200) {
                return extract_content(res->body);
            }
            std::ostringstream err;
            err << "http " << res->status;
            last_error = err.str();
            const bool retryable = res->status >= 500 || res->status == 429;
            if (!retryable) break;
        }

        std::ostringstream err;
        err << "exhausted " << (cfg_.max_retries + 1) << " attempt(s): " << last_error;
        return {"", err.str()};
    }

    const char* name() const override { return "llm"; }

private:
    static AdapterResult extract_content(const std::string& body) {
        const nlohmann::json doc =
            nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded())
            return {"", "malformed completion envelope: not JSON"};
        if (!doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty())
            return {"", "malformed completion envelope: no choices"};
        const auto& message = doc["choices"][0];
        if (!message.contains("message") || !message["message"].contains("content") ||
            !message["message"]["content"].is_string())
            return {"", "malformed completion envelope: no message content"};
        return {message["message"]["content"].get<std::string>(), ""};
    }

    LlmAdapterConfig cfg_;
    std::string credential_;
    std::string base_;
    std::string prefix_;
    RequestGate gate_;
};

}  // namespace

std::unique_ptr<Adapter> make_llm_adapter(const LlmAdapterConfig& cfg) {
    return std::make_unique<LlmAdapter>(cfg);
}

}  // namespace rebal
