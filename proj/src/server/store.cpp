#include <sqlite3.h>

#include "sonic/server.hpp"

namespace sonic::server {

namespace {

const char* kSchema = R"(
CREATE TABLE IF NOT EXISTS requests (
  id INTEGER PRIMARY KEY,
  kind TEXT NOT NULL,
  subject TEXT NOT NULL,
  sender TEXT NOT NULL,
  state TEXT NOT NULL,
  enqueue_time REAL NOT NULL,
  play_start REAL NOT NULL,
  play_end REAL NOT NULL,
  cached INTEGER NOT NULL,
  push INTEGER NOT NULL,
  error TEXT NOT NULL,
  local_day INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS hits (
  t REAL NOT NULL,
  kind TEXT NOT NULL,
  subject TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS hits_t ON hits(t);
)";

void check(sqlite3* db, int rc) {
    if (rc != SQLITE_OK && rc != SQLITE_ROW && rc != SQLITE_DONE) throw ServerStoreError(sqlite3_errmsg(db));
}

struct Stmt {
    sqlite3* db;
    sqlite3_stmt* s = nullptr;
    Stmt(sqlite3* d, const char* sql) : db(d) { check(db, sqlite3_prepare_v2(db, sql, -1, &s, nullptr)); }
    ~Stmt() { sqlite3_finalize(s); }
    void text(int i, const std::string& v) { check(db, sqlite3_bind_text(s, i, v.data(), int(v.size()), SQLITE_TRANSIENT)); }
    void real(int i, double v) { check(db, sqlite3_bind_double(s, i, v)); }
    void integer(int i, std::int64_t v) { check(db, sqlite3_bind_int64(s, i, v)); }
    bool step() {
        int rc = sqlite3_step(s);
        check(db, rc);
        return rc == SQLITE_ROW;
    }
    std::string col_text(int c) const {
        auto p = reinterpret_cast<const char*>(sqlite3_column_text(s, c));
        return p ? p : "";
    }
};

RequestKind kind_of(const std::string& s) { return s == "gpt" ? RequestKind::Gpt : RequestKind::Url; }

}  // namespace

struct ServerStore::Impl {
    sqlite3* db = nullptr;
    mutable std::mutex mu;
};

ServerStore::ServerStore(const std::string& path) : impl_(std::make_unique<Impl>()) {
    if (sqlite3_open(path.c_str(), &impl_->db) != SQLITE_OK) {
        std::string m = impl_->db ? sqlite3_errmsg(impl_->db) : "cannot open database";
        sqlite3_close(impl_->db);
        throw ServerStoreError(m);
    }
    char* err = nullptr;
    if (sqlite3_exec(impl_->db, kSchema, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string m = err ? err : "schema";
        sqlite3_free(err);
        throw ServerStoreError(m);
    }
}

ServerStore::~ServerStore() { sqlite3_close(impl_->db); }

void ServerStore::save(const RequestRecord& r, std::int64_t local_day) {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db,
           "INSERT OR REPLACE INTO requests(id, kind, subject, sender, state, enqueue_time, play_start, play_end, "
           "cached, push, error, local_day) VALUES (?,?,?,?,?,?,?,?,?,?,?,?)");
    s.integer(1, r.id);
    s.text(2, to_string(r.kind));
    s.text(3, r.subject);
    s.text(4, r.sender);
    s.text(5, to_string(r.state));
    s.real(6, r.enqueue_time);
    s.real(7, r.play_start);
    s.real(8, r.play_end);
    s.integer(9, r.cached);
    s.integer(10, r.push);
    s.text(11, r.error);
    s.integer(12, local_day);
    s.step();
}

std::vector<RequestRecord> ServerStore::load_requests() const {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db,
           "SELECT id, kind, subject, sender, state, enqueue_time, play_start, play_end, cached, push, error "
           "FROM requests ORDER BY id");
    std::vector<RequestRecord> out;
    while (s.step()) {
        RequestRecord r;
        r.id = std::uint32_t(sqlite3_column_int64(s.s, 0));
        r.kind = kind_of(s.col_text(1));
        r.subject = s.col_text(2);
        r.sender = s.col_text(3);
        r.state = parse_state(s.col_text(4)).value_or(RequestState::Failed);
        r.enqueue_time = sqlite3_column_double(s.s, 5);
        r.play_start = sqlite3_column_double(s.s, 6);
        r.play_end = sqlite3_column_double(s.s, 7);
        r.cached = sqlite3_column_int(s.s, 8) != 0;
        r.push = sqlite3_column_int(s.s, 9) != 0;
        r.error = s.col_text(10);
        out.push_back(std::move(r));
    }
    return out;
}

std::map<std::pair<std::string, std::int64_t>, int> ServerStore::quota_counts() const {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db, "SELECT sender, local_day, COUNT(*) FROM requests WHERE push = 0 GROUP BY sender, local_day");
    std::map<std::pair<std::string, std::int64_t>, int> out;
    while (s.step()) out[{s.col_text(0), sqlite3_column_int64(s.s, 1)}] = sqlite3_column_int(s.s, 2);
    return out;
}

void ServerStore::record_hit(RequestKind kind, const std::string& subject, double t) {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db, "INSERT INTO hits(t, kind, subject) VALUES (?,?,?)");
    s.real(1, t);
    s.text(2, to_string(kind));
    s.text(3, subject);
    s.step();
}

Popularity ServerStore::load_popularity(double since) const {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db, "SELECT t, kind, subject FROM hits WHERE t >= ? ORDER BY t");
    s.real(1, since);
    Popularity p;
    while (s.step()) p.record(kind_of(s.col_text(1)), s.col_text(2), sqlite3_column_double(s.s, 0));
    return p;
}

}  // namespace sonic::server
