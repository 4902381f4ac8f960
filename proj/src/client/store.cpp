#include <sqlite3.h>

#include "sonic/client.hpp"

namespace sonic::client {

namespace {

const char* kSchema = R"(
CREATE TABLE IF NOT EXISTS items (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  request_id INTEGER NOT NULL,
  content_type INTEGER NOT NULL,
  source TEXT NOT NULL,
  meta BLOB NOT NULL,
  body BLOB NOT NULL,
  loss REAL NOT NULL,
  pixel_loss REAL NOT NULL,
  status INTEGER NOT NULL,
  received_at INTEGER NOT NULL,
  last_accessed INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS items_accessed ON items(last_accessed);
)";

class Stmt {
public:
    Stmt(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &s_, nullptr) != SQLITE_OK) throw StoreError(sqlite3_errmsg(db));
    }
    ~Stmt() { sqlite3_finalize(s_); }
    Stmt& bind(int i, std::int64_t v) { return check(sqlite3_bind_int64(s_, i, v)); }
    Stmt& bind(int i, double v) { return check(sqlite3_bind_double(s_, i, v)); }
    Stmt& bind(int i, const std::string& v) {
        return check(sqlite3_bind_text(s_, i, v.data(), int(v.size()), SQLITE_TRANSIENT));
    }
    Stmt& bind(int i, const Bytes& v) {
        return check(sqlite3_bind_blob(s_, i, v.empty() ? "" : (const void*)v.data(), int(v.size()), SQLITE_TRANSIENT));
    }
    bool step() {
        int rc = sqlite3_step(s_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw StoreError(sqlite3_errmsg(db_));
    }
    std::int64_t i64(int c) const { return sqlite3_column_int64(s_, c); }
    double dbl(int c) const { return sqlite3_column_double(s_, c); }
    std::string text(int c) const {
        auto p = reinterpret_cast<const char*>(sqlite3_column_text(s_, c));
        return p ? std::string(p, std::size_t(sqlite3_column_bytes(s_, c))) : std::string();
    }
    Bytes blob(int c) const {
        auto p = static_cast<const std::uint8_t*>(sqlite3_column_blob(s_, c));
        return p ? Bytes(p, p + sqlite3_column_bytes(s_, c)) : Bytes();
    }

private:
    Stmt& check(int rc) {
        if (rc != SQLITE_OK) throw StoreError(sqlite3_errmsg(db_));
        return *this;
    }
    sqlite3* db_;
    sqlite3_stmt* s_ = nullptr;
};

}  // namespace

struct ItemStore::Impl {
    sqlite3* db = nullptr;
    mutable std::mutex mu;

    void exec(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            std::string m = err ? err : "sqlite error";
            sqlite3_free(err);
            throw StoreError(m);
        }
    }

    void touch(std::int64_t id, std::int64_t now) {
        Stmt(db, "UPDATE items SET last_accessed = MAX(last_accessed, ?) WHERE id = ?").bind(1, now).bind(2, id).step();
    }
};

ItemStore::ItemStore(const std::string& path) : impl_(std::make_unique<Impl>()) {
    if (sqlite3_open(path.c_str(), &impl_->db) != SQLITE_OK) {
        std::string m = impl_->db ? sqlite3_errmsg(impl_->db) : "cannot open database";
        sqlite3_close(impl_->db);
        throw StoreError(m);
    }
    impl_->exec(kSchema);
}

ItemStore::~ItemStore() { sqlite3_close(impl_->db); }

std::int64_t ItemStore::store(const ReceivedItem& item) {
    Bytes body = item.meta.content_type == format::ContentType::Webpage && item.image.width > 0
                     ? render::encode_png(item.image)
                     : Bytes(item.text.begin(), item.text.end());
    Bytes meta = format::serialize_metadata(item.meta, item.links);
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db,
           "INSERT INTO items(request_id, content_type, source, meta, body, loss, pixel_loss, status, received_at, "
           "last_accessed) VALUES (?,?,?,?,?,?,?,?,?,?)");
    s.bind(1, std::int64_t(item.meta.request_id))
        .bind(2, std::int64_t(item.meta.content_type))
        .bind(3, item.meta.source)
        .bind(4, meta)
        .bind(5, body)
        .bind(6, item.loss_percent)
        .bind(7, item.pixel_loss_percent)
        .bind(8, std::int64_t(item.status))
        .bind(9, item.received_at)
        .bind(10, std::max(item.last_accessed, item.received_at));
    s.step();
    return sqlite3_last_insert_rowid(impl_->db);
}

std::size_t ItemStore::evict(std::int64_t now, std::int64_t max_idle) {
    std::lock_guard lk(impl_->mu);
    Stmt(impl_->db, "DELETE FROM items WHERE ? - last_accessed > ?").bind(1, now).bind(2, max_idle).step();
    return std::size_t(sqlite3_changes(impl_->db));
}

std::vector<ItemSummary> ItemStore::list_items() const {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db,
           "SELECT id, request_id, content_type, source, loss, status, received_at, last_accessed FROM items "
           "ORDER BY received_at DESC, id DESC");
    std::vector<ItemSummary> out;
    while (s.step()) {
        ItemSummary r;
        r.id = s.i64(0);
        r.request_id = std::uint32_t(s.i64(1));
        r.content_type = format::ContentType(s.i64(2));
        r.source = s.text(3);
        r.loss_percent = s.dbl(4);
        r.status = Completion(s.i64(5));
        r.received_at = s.i64(6);
        r.last_accessed = s.i64(7);
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<ReceivedItem> ItemStore::get_item(std::int64_t id, std::int64_t now) {
    std::lock_guard lk(impl_->mu);
    impl_->touch(id, now);
    Stmt s(impl_->db,
           "SELECT meta, body, loss, pixel_loss, status, received_at, last_accessed FROM items WHERE id = ?");
    s.bind(1, id);
    if (!s.step()) return std::nullopt;
    auto pm = format::parse_metadata(s.blob(0));
    ReceivedItem it;
    it.id = id;
    it.meta = std::move(pm.meta);
    it.links = std::move(pm.links);
    Bytes body = s.blob(1);
    if (it.meta.content_type == format::ContentType::Webpage) {
        if (!body.empty()) it.image = render::decode_png(body);
    } else {
        it.text.assign(body.begin(), body.end());
    }
    it.loss_percent = s.dbl(2);
    it.pixel_loss_percent = s.dbl(3);
    it.status = Completion(s.i64(4));
    it.complete = it.loss_percent == 0.0;
    it.received_at = s.i64(5);
    it.last_accessed = s.i64(6);
    return it;
}

std::optional<Bytes> ItemStore::image_png(std::int64_t id, std::int64_t now) {
    std::lock_guard lk(impl_->mu);
    impl_->touch(id, now);
    Stmt s(impl_->db, "SELECT body FROM items WHERE id = ? AND content_type = ?");
    s.bind(1, id).bind(2, std::int64_t(format::ContentType::Webpage));
    if (!s.step()) return std::nullopt;
    return s.blob(0);
}

std::size_t ItemStore::size() const {
    std::lock_guard lk(impl_->mu);
    Stmt s(impl_->db, "SELECT COUNT(*) FROM items");
    s.step();
    return std::size_t(s.i64(0));
}

}  // namespace sonic::client
