#include "serve.hpp"

#include "capi.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>
#include <variant>

namespace cli {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using json = nlohmann::json;

namespace {

struct Command {
    long seq = 0;
    json id;  // client supplied, null when absent
    std::string type;
    json payload;
};

struct Ack {
    long seq;
    json id;
    std::string type;
    long tick;
};

struct Frame {
    long tick = 0;
    std::vector<double> xy;
    double mean_displacement = 0;
    double mean_anchor_distance = 0;
    cs_weights weights{};
    bool paused = false;
    std::vector<Ack> acks;
    bool positions = true;  // false: acknowledgement only (paused session)
};

json weights_json(const cs_weights& w) {
    return {{"spring", w.spring}, {"repulsion", w.repulsion}, {"gravity", w.gravity}};
}

json acks_json(const std::vector<Ack>& acks) {
    json a = json::array();
    for (const auto& k : acks) a.push_back({{"seq", k.seq}, {"id", k.id}, {"type", k.type}, {"tick", k.tick}});
    return a;
}

// Validates a client message; returns an error text or the command.
std::variant<std::string, Command> parse_command(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        return std::string("malformed JSON: ") + e.what();
    }
    if (!j.is_object()) return std::string("command must be a JSON object");
    if (!j.contains("v") || j["v"] != 1) return std::string("unsupported or missing protocol version (expected \"v\":1)");
    if (!j.contains("type") || !j["type"].is_string()) return std::string("missing command type");
    Command c;
    c.type = j["type"];
    if (j.contains("id")) c.id = j["id"];
    if (c.type == "setWeights") {
        if (!j.contains("weights") || !j["weights"].is_object() || j["weights"].empty())
            return std::string("setWeights needs a non-empty weights object");
        for (const auto& [k, v] : j["weights"].items()) {
            if (k != "spring" && k != "repulsion" && k != "gravity") return "unknown weight: " + k;
            if (!v.is_number()) return "weight " + k + " must be a number";
            const double d = v.get<double>();
            if (!std::isfinite(d) || d < 0) return "weight " + k + " must be finite and non-negative";
        }
        c.payload = j["weights"];
    } else if (c.type == "reseed") {
        if (!j.contains("seed") || !j["seed"].is_number_unsigned()) return std::string("reseed needs a non-negative integer seed");
        c.payload = j["seed"];
    } else if (c.type != "pause" && c.type != "resume" && c.type != "reset") {
        return "unknown command type: " + c.type;
    }
    return c;
}

// ---------------------------------------------------------------- stepper

class Stepper {
public:
    Stepper(LayoutPtr layout, const ServeOptions& o) : layout_(std::move(layout)), o_(o) {}

    void submit(Command c) {
        {
            std::lock_guard lock(mu_);
            queue_.push_back(std::move(c));
        }
        cv_.notify_one();
    }

    void stop() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_one();
    }

    template <class Emit>
    void run(Emit emit) {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / o_.fps));
        auto next = clock::now();
        const std::size_t n = cs_layout_node_count(layout_.get());
        for (;;) {
            std::deque<Command> batch;
            {
                std::unique_lock lock(mu_);
                if (paused_)
                    cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
                else
                    cv_.wait_until(lock, next, [&] { return stop_; });
                if (stop_) return;
                batch.swap(queue_);
            }
            std::vector<Ack> acks;
            for (auto& c : batch) {
                apply(c);
                acks.push_back(Ack{c.seq, c.id, c.type, 0});
            }
            Frame f;
            f.paused = paused_;
            if (!paused_) {
                double md = 0;
                check(cs_layout_step(layout_.get(), o_.ticks_per_frame, &md));
                f.mean_displacement = md;
                f.xy.resize(2 * n);
                check(cs_layout_positions(layout_.get(), f.xy.data(), n));
                cs_layout_anchor_distance(layout_.get(), &f.mean_anchor_distance, nullptr);
                next += period;
                if (next < clock::now()) next = clock::now();
            } else {
                if (acks.empty()) continue;
                f.positions = false;
                next = clock::now();
            }
            f.tick = cs_layout_tick(layout_.get());
            cs_layout_get_weights(layout_.get(), &f.weights);
            for (auto& a : acks) a.tick = f.tick;
            f.acks = std::move(acks);
            emit(std::move(f));
        }
    }

private:
    void apply(const Command& c) {
        if (c.type == "setWeights") {
            cs_weights w{};
            cs_layout_get_weights(layout_.get(), &w);
            for (const auto& [k, v] : c.payload.items()) {
                const double d = v.get<double>();
                if (k == "spring") w.spring = d;
                if (k == "repulsion") w.repulsion = d;
                if (k == "gravity") w.gravity = d;
            }
            check(cs_layout_set_weights(layout_.get(), &w));
        } else if (c.type == "pause") {
            paused_ = true;
        } else if (c.type == "resume") {
            paused_ = false;
        } else if (c.type == "reset") {
            check(cs_layout_reset(layout_.get()));
        } else if (c.type == "reseed") {
            check(cs_layout_reseed(layout_.get(), c.payload.get<std::uint64_t>()));
        }
    }

    LayoutPtr layout_;
    const ServeOptions& o_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Command> queue_;
    bool stop_ = false;
    bool paused_ = false;
};

// ---------------------------------------------------------------- network

class WsSession;

// Lives on the io thread: frame encoding and fan-out to every viewer.
class Hub {
public:
    Hub(std::size_t nodes, const ServeOptions& o, std::vector<double> initial, cs_weights w)
        : n_(nodes), delta_(nodes > o.delta_above), o_(o), sent_(initial), latest_(std::move(initial)), weights_(w) {}

    void join(const std::shared_ptr<WsSession>& s);
    void leave(WsSession* s) {
        for (auto it = viewers_.begin(); it != viewers_.end(); ++it)
            if (it->get() == s) {
                viewers_.erase(it);
                return;
            }
    }

    void publish(Frame f);

    std::string snapshot_json(const std::vector<std::string>& ids) const {
        json j{{"v", 1}, {"tick", tick_}, {"weights", weights_json(weights_)}};
        auto& pos = j["positions"] = json::array();
        for (std::size_t i = 0; i < n_; ++i) pos.push_back({{"id", ids[i]}, {"x", latest_[2 * i]}, {"y", latest_[2 * i + 1]}});
        return j.dump();
    }

    long next_seq() { return ++seq_; }
    const ServeOptions& options() const { return o_; }
    std::size_t nodes() const { return n_; }
    bool delta() const { return delta_; }

private:
    void broadcast(std::string msg);
    std::string keyframe() const {
        json j{{"v", 1},       {"type", "frame"},  {"tick", tick_},     {"keyframe", true},
               {"paused", paused_}, {"weights", weights_json(weights_)}, {"acks", json::array()},
               {"encoding", "full"}, {"positions", sent_}};
        return j.dump();
    }

    std::size_t n_;
    bool delta_;
    const ServeOptions& o_;
    std::vector<double> sent_;  // what viewers hold
    std::vector<double> latest_;
    cs_weights weights_;
    long tick_ = 0;
    bool paused_ = false;
    long seq_ = 0;
    long frames_ = 0;
    std::vector<std::shared_ptr<WsSession>> viewers_;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, Hub& hub, Stepper& stepper)
        : ws_(std::move(socket)), hub_(hub), stepper_(stepper) {}

    template <class Body, class Allocator>
    void start(http::request<Body, http::basic_fields<Allocator>> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->hub_.join(self);
            self->read();
        });
    }

    void send(std::shared_ptr<const std::string> msg) {
        if (closed_) return;
        if (queue_.size() > 512) {  // viewer cannot keep up
            closed_ = true;
            hub_.leave(this);
            beast::get_lowest_layer(ws_).close();
            return;
        }
        queue_.push_back(std::move(msg));
        if (queue_.size() == 1) write();
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->hub_.leave(self.get());
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            auto parsed = parse_command(text);
            if (auto* err = std::get_if<std::string>(&parsed)) {
                json e{{"v", 1}, {"type", "error"}, {"message", *err}};
                try {
                    const json j = json::parse(text);
                    if (j.is_object() && j.contains("id")) e["id"] = j["id"];
                } catch (const json::exception&) {
                }
                self->send(std::make_shared<const std::string>(e.dump()));
            } else {
                auto c = std::get<Command>(std::move(parsed));
                c.seq = self->hub_.next_seq();
                self->stepper_.submit(std::move(c));
            }
            self->read();
        });
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->hub_.leave(self.get());
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    Hub& hub_;
    Stepper& stepper_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool closed_ = false;
};

void Hub::join(const std::shared_ptr<WsSession>& s) {
    viewers_.push_back(s);
    json hello{{"v", 1},           {"type", "hello"},    {"nodes", n_},   {"fps", o_.fps},
               {"ticksPerFrame", o_.ticks_per_frame}, {"deltaEncoding", delta_}, {"graph", "/graph"}};
    s->send(std::make_shared<const std::string>(hello.dump()));
    s->send(std::make_shared<const std::string>(keyframe()));
}

void Hub::broadcast(std::string msg) {
    auto shared = std::make_shared<const std::string>(std::move(msg));
    auto viewers = viewers_;  // send may drop a slow viewer
    for (auto& v : viewers) v->send(shared);
}

void Hub::publish(Frame f) {
    weights_ = f.weights;
    paused_ = f.paused;
    json j{{"v", 1}, {"type", f.positions ? "frame" : "ack"}, {"tick", f.tick}, {"paused", f.paused},
           {"weights", weights_json(f.weights)}, {"acks", acks_json(f.acks)}};
    if (!f.positions) {
        tick_ = f.tick;
        broadcast(j.dump());
        return;
    }
    latest_ = f.xy;
    j["meanDisplacement"] = f.mean_displacement;
    j["meanAnchorDistance"] = f.mean_anchor_distance;
    const bool key = !delta_ || frames_ % std::max(1, o_.keyframe_every) == 0;
    if (key) {
        sent_ = std::move(f.xy);
        j["encoding"] = "full";
        j["positions"] = sent_;
    } else {
        // send only nodes that moved more than the convergence tolerance
        cs_layout_options d;
        cs_layout_default_options(&d);
        const double tol = 1e-3 * (o_.layout.scale > 0 ? o_.layout.scale : d.scale);
        json changed = json::array();
        for (std::size_t i = 0; i < n_; ++i) {
            const double dx = f.xy[2 * i] - sent_[2 * i], dy = f.xy[2 * i + 1] - sent_[2 * i + 1];
            if (dx * dx + dy * dy <= tol * tol) continue;
            sent_[2 * i] = f.xy[2 * i];
            sent_[2 * i + 1] = f.xy[2 * i + 1];
            changed.push_back(i);
            changed.push_back(f.xy[2 * i]);
            changed.push_back(f.xy[2 * i + 1]);
        }
        j["encoding"] = "delta";
        j["base"] = tick_;
        j["changed"] = std::move(changed);
    }
    tick_ = f.tick;
    ++frames_;
    broadcast(j.dump());
}

struct Site {
    std::string graph_json;
    std::vector<std::string> ids;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, Hub& hub, Stepper& stepper, const Site& site)
        : stream_(std::move(socket)), hub_(hub), stepper_(stepper), site_(site) {}

    void run() { read(); }

private:
    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->handle();
        });
    }

    void handle() {
        if (websocket::is_upgrade(req_)) {
            if (req_.target() == "/session") {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), hub_, stepper_)->start(std::move(req_));
                return;
            }
            return respond(http::status::not_found, "text/plain", "no websocket at this path\n");
        }
        if (req_.method() != http::verb::get && req_.method() != http::verb::head)
            return respond(http::status::method_not_allowed, "text/plain", "GET only\n");
        const auto target = req_.target();
        if (target == "/graph") return respond(http::status::ok, "application/json", site_.graph_json);
        if (target == "/snapshot") return respond(http::status::ok, "application/json", hub_.snapshot_json(site_.ids) + "\n");
        if (target == "/")
            return respond(http::status::ok, "text/plain",
                           "cellscope serve\nGET /graph\nGET /snapshot\nWebSocket /session (protocol v1)\n");
        respond(http::status::not_found, "text/plain", "not found\n");
    }

    void respond(http::status status, const char* type, std::string body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::server, "cellscope");
        res->set(http::field::content_type, type);
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(req_.keep_alive());
        if (req_.method() != http::verb::head) res->body() = std::move(body);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (!res->keep_alive()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->read();
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    Hub& hub_;
    Stepper& stepper_;
    const Site& site_;
};

void accept(tcp::acceptor& acceptor, Hub& hub, Stepper& stepper, const Site& site) {
    acceptor.async_accept([&](beast::error_code ec, tcp::socket socket) {
        if (!ec) std::make_shared<HttpSession>(std::move(socket), hub, stepper, site)->run();
        if (acceptor.is_open()) accept(acceptor, hub, stepper, site);
    });
}

}  // namespace

int serve(const ServeOptions& o) {
    if (!(o.fps > 0) || o.ticks_per_frame < 1) throw Failure(CS_ERR_ARGUMENT, "fps and ticks per frame must be positive");
    auto wb = open_workbook(o.input);
    auto g = build_graph(wb.get(), o.level);
    if (o.level == CS_LEVEL_FINE) {
        cs_analyze_options ao;
        cs_analyze_default_options(&ao);
        auto report = analyze(wb.get(), &ao, o.input);
        check(cs_graph_set_boundaries(g.get(), report.get()));
    }

    Site site;
    char* js = nullptr;
    check(cs_graph_json(g.get(), &js));
    site.graph_json = take(js);
    for (std::size_t i = 0; i < cs_graph_node_count(g.get()); ++i) {
        char* id = nullptr;
        check(cs_graph_node_id(g.get(), i, &id));
        site.ids.push_back(take(id));
    }

    cs_layout* raw = nullptr;
    check(cs_layout_create(g.get(), &o.layout, &raw));
    LayoutPtr layout(raw);
    const std::size_t n = cs_layout_node_count(raw);
    std::vector<double> initial(2 * n);
    check(cs_layout_positions(raw, initial.data(), n));
    cs_weights w{};
    cs_layout_get_weights(raw, &w);

    net::io_context io(1);
    tcp::acceptor acceptor(io);
    const tcp::endpoint ep(net::ip::make_address(o.host), o.port);
    beast::error_code ec;
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw Failure(CS_ERR_IO, "cannot listen on " + o.host + ":" + std::to_string(o.port) + ": " + ec.message());

    Hub hub(n, o, std::move(initial), w);
    Stepper stepper(std::move(layout), o);
    accept(acceptor, hub, stepper, site);

    net::signal_set signals(io, SIGINT, SIGTERM);
    signals.async_wait([&](beast::error_code, int) {
        stepper.stop();
        acceptor.close();
        io.stop();
    });

    std::cout << "listening on http://" << o.host << ":" << acceptor.local_endpoint().port() << std::endl;

    std::exception_ptr failure;
    std::thread worker([&] {
        try {
            stepper.run([&](Frame f) { net::post(io, [&hub, f = std::move(f)]() mutable { hub.publish(std::move(f)); }); });
        } catch (...) {
            failure = std::current_exception();
            net::post(io, [&] { io.stop(); });
        }
    });
    io.run();
    stepper.stop();
    worker.join();
    if (failure) std::rethrow_exception(failure);
    return 0;
}

}  // namespace cli
