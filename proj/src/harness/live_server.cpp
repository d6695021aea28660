#include "vslam/harness/live_server.hpp"

#include <chrono>
#include <csignal>
#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "vslam/harness/live_session.hpp"

namespace vslam::harness {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

// Writer backlog beyond which outgoing messages are dropped; the client sees a
// version gap and asks for a resync.
constexpr std::size_t kMaxBacklog = 256;

}  // namespace

struct LiveServer::Impl {
    Impl(const RunConfig& c, MeshModel mesh) : cfg(c), session(c, std::move(mesh)) {}

    RunConfig cfg;
    LiveSession session;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    bool active = false;

    void do_accept();
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, LiveServer::Impl& srv, bool reject)
        : ws_(std::move(socket)), srv_(srv), timer_(ws_.get_executor()), reject_(reject) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
    }

private:
    using Clock = std::chrono::steady_clock;

    void on_accept(beast::error_code ec) {
        if (ec) return;
        if (reject_) {
            outq_.push_back(R"({"type":"error","msg":"server busy: one client at a time"})");
            closing_ = true;
            write_next();
            return;
        }
        owner_ = true;
        srv_.active = true;
        epoch_ = Clock::now();
        next_tick_ = epoch_;
        enqueue(srv_.session.on_connect());
        do_read();
        schedule_tick();
    }

    void do_read() {
        ws_.async_read(buf_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            finish();
            return;
        }
        const std::string text = beast::buffers_to_string(buf_.data());
        buf_.consume(buf_.size());
        enqueue(srv_.session.handle_message(text));
        do_read();
    }

    void schedule_tick() {
        const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / srv_.cfg.live_tick_hz));
        next_tick_ += period;
        // fell far behind: resynchronize instead of bursting
        if (next_tick_ + 4 * period < Clock::now()) next_tick_ = Clock::now() + period;
        timer_.expires_at(next_tick_);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (ec || self->closed_) return;
            const double now = std::chrono::duration<double>(Clock::now() - self->epoch_).count();
            self->enqueue(self->srv_.session.tick(now));
            self->schedule_tick();
        });
    }

    void enqueue(std::vector<std::string> msgs) {
        if (closed_) return;
        for (auto& m : msgs) {
            if (outq_.size() >= kMaxBacklog) break;
            outq_.push_back(std::move(m));
        }
        if (!writing_) write_next();
    }

    void write_next() {
        if (outq_.empty()) {
            if (closing_) {
                ws_.async_close(websocket::close_code::try_again_later,
                                [self = shared_from_this()](beast::error_code) {});
            }
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(outq_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        writing_ = false;
        if (ec) {
            finish();
            return;
        }
        outq_.pop_front();
        write_next();
    }

    void finish() {
        if (closed_) return;
        closed_ = true;
        timer_.cancel();
        if (owner_) {
            srv_.session.reset();
            srv_.active = false;
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    LiveServer::Impl& srv_;
    net::steady_timer timer_;
    beast::flat_buffer buf_;
    std::deque<std::string> outq_;
    Clock::time_point epoch_;
    Clock::time_point next_tick_;
    bool reject_ = false;
    bool owner_ = false;
    bool writing_ = false;
    bool closing_ = false;
    bool closed_ = false;
};

}  // namespace

void LiveServer::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec == net::error::operation_aborted) return;
        } else {
            std::make_shared<Connection>(std::move(socket), *this, active)->start();
        }
        do_accept();
    });
}

LiveServer::LiveServer(const RunConfig& cfg, MeshModel mesh) : impl_(std::make_unique<Impl>(cfg, std::move(mesh))) {}

LiveServer::~LiveServer() = default;

unsigned short LiveServer::listen(const std::string& address, unsigned short port) {
    const tcp::endpoint ep(net::ip::make_address(address), port);
    auto& a = impl_->acceptor;
    a.open(ep.protocol());
    a.set_option(net::socket_base::reuse_address(true));
    a.bind(ep);
    a.listen(net::socket_base::max_listen_connections);
    return a.local_endpoint().port();
}

void LiveServer::run(bool handle_signals) {
    std::optional<net::signal_set> signals;
    if (handle_signals) {
        signals.emplace(impl_->ioc, SIGINT, SIGTERM);
        signals->async_wait([this](beast::error_code, int) { stop(); });
    }
    impl_->do_accept();
    impl_->ioc.run();
}

void LiveServer::stop() {
    net::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
        impl_->ioc.stop();
    });
}

}  // namespace vslam::harness
