#include "dipsent/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <random>
#include <thread>

#include "dipsent/error.hpp"

namespace dipsent {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body,
                         const HttpHeaders& headers,
                         std::chrono::milliseconds timeout) override {
    auto [base, path] = split_url(url);
    httplib::Client client(base);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::Read ||
                             err == httplib::Error::ConnectionTimeout ||
                             err == httplib::Error::Write;
      throw TransportFailure("POST " + url + ": " + httplib::to_string(err),
                             timed_out);
    }
    return {res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() {
  return std::make_shared<HttplibTransport>();
}

Sleeper thread_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds RetryPolicy::delay_before(int retry) const {
  const int shift = std::clamp(retry - 1, 0, 20);
  auto delay = backoff_base * (1LL << shift);
  if (jitter) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    delay = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(delay.count()) * scale(rng)));
  }
  return delay;
}

HttpResponse post_with_retries(HttpTransport& transport, const std::string& url,
                               const std::string& body, const HttpHeaders& headers,
                               std::chrono::milliseconds timeout,
                               const RetryPolicy& policy, const Sleeper& sleep,
                               std::string_view service) {
  std::string last_failure;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0 && sleep) sleep(policy.delay_before(attempt));
    try {
      auto res = transport.post_json(url, body, headers, timeout);
      if (res.status >= 200 && res.status < 300) return res;
      if (res.status >= 400 && res.status < 500) {
        throw Error(ErrorCode::OracleRejected,
                    std::string(service) + " rejected request with HTTP " +
                        std::to_string(res.status) + ": " + res.body);
      }
      last_failure = "HTTP " + std::to_string(res.status);
    } catch (const TransportFailure& e) {
      last_failure = e.what();
    }
  }
  throw Error(ErrorCode::OracleUnavailable,
              std::string(service) + " unavailable after " +
                  std::to_string(policy.max_retries) + " retries: " + last_failure);
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::Configuration, "endpoint URL lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace dipsent
