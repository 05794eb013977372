#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "crashbench/scorer.hpp"
#include "jsonl.hpp"

namespace crashbench {

using jsonl::json;

struct SubprocessScorer::Impl {
  std::string command;
  bool send_pixels = true;
  pid_t pid = -1;
  int to_child = -1;    // write end of child's stdin
  int from_child = -1;  // read end of child's stdout
  std::string read_buf;
  std::uint64_t next_id = 1;
  std::map<std::uint64_t, double> pending;  // out-of-order replies

  void spawn() {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
      throw BackendError("subprocess scorer: pipe() failed: " +
                         std::string(std::strerror(errno)));
    }
    pid = fork();
    if (pid < 0) {
      throw BackendError("subprocess scorer: fork() failed: " +
                         std::string(std::strerror(errno)));
    }
    if (pid == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
      close(out_pipe[0]);
      close(out_pipe[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child = in_pipe[1];
    from_child = out_pipe[0];
  }

  void shutdown() {
    if (to_child >= 0) close(to_child);
    if (from_child >= 0) close(from_child);
    to_child = from_child = -1;
    if (pid > 0) {
      int status = 0;
      waitpid(pid, &status, 0);
      pid = -1;
    }
  }

  void write_all(const std::string& text) {
    size_t off = 0;
    while (off < text.size()) {
      const ssize_t n = write(to_child, text.data() + off, text.size() - off);
      if (n <= 0) {
        if (errno == EINTR) continue;
        throw BackendError("subprocess scorer: backend closed stdin (" +
                           std::string(std::strerror(errno)) +
                           "); command: " + command);
      }
      off += static_cast<size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      const auto nl = read_buf.find('\n');
      if (nl != std::string::npos) {
        std::string line = read_buf.substr(0, nl);
        read_buf.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = read(from_child, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError("subprocess scorer: read failed: " +
                           std::string(std::strerror(errno)));
      }
      if (n == 0) {
        throw BackendError(
            "subprocess scorer: backend exited before replying; command: " +
            command);
      }
      read_buf.append(chunk, static_cast<size_t>(n));
    }
  }

  double await_reply(std::uint64_t id) {
    for (;;) {
      auto it = pending.find(id);
      if (it != pending.end()) {
        const double score = it->second;
        pending.erase(it);
        return score;
      }
      const std::string line = read_line();
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.contains("id") || !obj.contains("score")) {
        throw BackendError("subprocess scorer: malformed reply line: " + line);
      }
      const auto reply_id = obj.at("id").get<std::uint64_t>();
      const double score = obj.at("score").get<double>();
      if (score < 0.0 || score > 1.0) {
        throw BackendError("subprocess scorer: score " +
                           std::to_string(score) + " outside [0,1]");
      }
      pending[reply_id] = score;
    }
  }
};

SubprocessScorer::SubprocessScorer(std::string command, bool send_pixels)
    : impl_(std::make_unique<Impl>()) {
  impl_->command = std::move(command);
  impl_->send_pixels = send_pixels;
  impl_->spawn();
}

SubprocessScorer::~SubprocessScorer() {
  if (impl_) impl_->shutdown();
}

double SubprocessScorer::score(const Window& window) {
  const std::uint64_t id = impl_->next_id++;
  json req;
  req["id"] = id;
  req["start_frame"] = static_cast<std::uint64_t>(window.start_frame_index);
  req["shape"] = {Window::kFrames, 256, 256, 3};
  if (impl_->send_pixels) {
    std::vector<std::uint8_t> raw;
    raw.reserve(Window::kFrames * 256 * 256 * 3 * sizeof(float));
    for (const auto& frame : window.frames) {
      if (!frame) throw BackendError("subprocess scorer: window frame missing");
      const auto* bytes =
          reinterpret_cast<const std::uint8_t*>(frame->data.data());
      raw.insert(raw.end(), bytes, bytes + frame->data.size() * sizeof(float));
    }
    // Little-endian f32; this toolkit only targets little-endian hosts.
    req["data"] = detail::base64_encode(raw.data(), raw.size());
  } else {
    req["clip_id"] = window.clip_id;
  }
  impl_->write_all(req.dump() + "\n");
  return impl_->await_reply(id);
}

}  // namespace crashbench
