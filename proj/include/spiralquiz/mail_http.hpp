#pragma once

#include <stdexcept>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "spiralquiz/pipeline.hpp"

namespace spiralquiz {

/// POSTs each message as JSON to an HTTP endpoint, e.g. http://host:port/path.
class HttpPostTransport final : public MailTransport {
  public:
    explicit HttpPostTransport(const std::string& endpoint) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw std::invalid_argument("endpoint must look like http://host[:port]/path");
        auto path_start = endpoint.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
    }

    void send(const OutboxMessage& message) override {
        nlohmann::json j = {{"to", message.recipient},
                            {"subject", message.subject},
                            {"body", message.body}};
        httplib::Client client(base_);
        client.set_connection_timeout(5);
        client.set_read_timeout(10);
        auto res = client.Post(path_, j.dump(), "application/json");
        if (!res)
            throw std::runtime_error("connection to " + base_ + " failed");
        if (res->status < 200 || res->status >= 300)
            throw std::runtime_error("endpoint returned status " +
                                     std::to_string(res->status));
    }

  private:
    std::string base_;
    std::string path_;
};

}  // namespace spiralquiz
