#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dipsent {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Raised by a transport when no HTTP response was obtained at all.
class TransportFailure : public std::runtime_error {
 public:
  TransportFailure(const std::string& what, bool timed_out)
      : std::runtime_error(what), timed_out_(timed_out) {}
  bool timed_out() const noexcept { return timed_out_; }

 private:
  bool timed_out_;
};

/// JSON-over-POST transport. Implementations must be callable concurrently.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const HttpHeaders& headers,
                                 std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; opens a connection per request.
std::shared_ptr<HttpTransport> make_default_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Real sleeping via std::this_thread.
Sleeper thread_sleeper();

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  bool jitter = false;

  /// Wait before retry number `retry` (1-based): base * 2^(retry-1),
  /// scaled by a factor in [0.5, 1.5) when jitter is on.
  std::chrono::milliseconds delay_before(int retry) const;
};

/// POSTs `body` and returns the first 2xx response. Timeouts, transport
/// failures and 5xx are retried per `policy`; 4xx raises OracleRejected at
/// once; exhaustion raises OracleUnavailable. `service` names the upstream
/// in error messages.
HttpResponse post_with_retries(HttpTransport& transport, const std::string& url,
                               const std::string& body, const HttpHeaders& headers,
                               std::chrono::milliseconds timeout,
                               const RetryPolicy& policy, const Sleeper& sleep,
                               std::string_view service);

/// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace dipsent
