#include "helix/backend.hpp"

#include "helix/error.hpp"

#include <json.hpp>

#include <csignal>
#include <cstring>
#include <sys/wait.h>
#include <unistd.h>

namespace helix {

ExternalBackend::ExternalBackend(const std::string & command) {
    int to_pipe[2];
    int from_pipe[2];
    if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0) {
        throw io_error("external backend: pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        throw io_error("external backend: fork() failed");
    }
    if (pid == 0) {
        dup2(to_pipe[0], STDIN_FILENO);
        dup2(from_pipe[1], STDOUT_FILENO);
        close(to_pipe[0]);
        close(to_pipe[1]);
        close(from_pipe[0]);
        close(from_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), (char *)nullptr);
        _exit(127);
    }
    child_pid_ = pid;
    to_child_ = to_pipe[1];
    from_child_ = from_pipe[0];
    close(to_pipe[0]);
    close(from_pipe[1]);

    // Handshake: issue the first step now so a broken command fails fast.
    try {
        first_ = request_step();
        first_pending_ = true;
    } catch (const error &) {
        shutdown();
        throw;
    }
    vocab_size_ = uint32_t(first_.logits.size());
    for (const auto & [layer, h] : first_.hidden) {
        layer_ids_.push_back(layer);
    }
    if (vocab_size_ < 2) {
        shutdown();
        throw protocol_error("external backend: handshake returned fewer than 2 logits");
    }
}

ExternalBackend::~ExternalBackend() {
    shutdown();
}

void ExternalBackend::shutdown() {
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        close(from_child_);
        from_child_ = -1;
    }
    if (child_pid_ > 0) {
        int status = 0;
        if (waitpid(child_pid_, &status, WNOHANG) == 0) {
            kill(child_pid_, SIGTERM);
            waitpid(child_pid_, &status, 0);
        }
        child_pid_ = -1;
    }
}

void ExternalBackend::send_line(const std::string & line) {
    std::string msg = line;
    msg += '\n';
    size_t off = 0;
    while (off < msg.size()) {
        const ssize_t n = write(to_child_, msg.data() + off, msg.size() - off);
        if (n <= 0) {
            throw protocol_error("external backend: write failed (engine gone?)");
        }
        off += size_t(n);
    }
}

std::string ExternalBackend::read_line() {
    for (;;) {
        const size_t nl = rx_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = rx_buffer_.substr(0, nl);
            rx_buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        const ssize_t n = read(from_child_, chunk, sizeof(chunk));
        if (n <= 0) {
            throw protocol_error("external backend: engine closed the stream");
        }
        rx_buffer_.append(chunk, size_t(n));
    }
}

StepOutput ExternalBackend::request_step() {
    nlohmann::json req;
    req["op"] = "step";
    req["tokens"] = tokens_;
    send_line(req.dump());

    const std::string line = read_line();
    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception & e) {
        throw protocol_error(std::string("external backend: bad response json: ") + e.what());
    }
    if (resp.contains("error")) {
        throw protocol_error("external backend: engine error: " + resp["error"].get<std::string>());
    }
    try {
        StepOutput out;
        out.logits = resp.at("logits").get<std::vector<double>>();
        for (const auto & [key, val] : resp.at("hidden").items()) {
            out.hidden[uint32_t(std::stoul(key))] = val.get<std::vector<double>>();
        }
        out.is_end = resp.value("eos", false);
        return out;
    } catch (const nlohmann::json::exception & e) {
        throw protocol_error(std::string("external backend: bad response schema: ") + e.what());
    }
}

StepOutput ExternalBackend::step(int sampled_token, double temperature) {
    (void)temperature;
    if (first_pending_) {
        first_pending_ = false;
        return first_;
    }
    tokens_.push_back(sampled_token);
    return request_step();
}

} // namespace helix
