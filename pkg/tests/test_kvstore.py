from twgraph.kvstore import KVStore


def test_put_get_scan_and_persistence(tmp_path):
    p = tmp_path / "db" / "kv.log"
    with KVStore(p) as kv:
        assert kv.put("a\x00b", "1")
        assert not kv.put("a\x00b", "1")
        kv.put("a\x00c", "2")
        kv.put("b", "3")
        kv.put("a\x00\U0001f600", "emoji")
        assert kv.put_if_absent("c") and not kv.put_if_absent("c", "x")
        assert kv.delete("b") and not kv.delete("b")
        assert [k for k, _ in kv.scan("a\x00")] == ["a\x00b", "a\x00c", "a\x00\U0001f600"]
        assert kv.scan("a\x00", start="c") == [("a\x00c", "2"), ("a\x00\U0001f600", "emoji")]
        assert kv.scan("a\x00", stop="c") == [("a\x00b", "1")]
        assert kv.count("a\x00") == 3
    with KVStore(p) as kv:
        assert kv.get("a\x00c") == "2" and "b" not in kv and len(kv) == 4


def test_unchanged_put_does_not_grow_log(tmp_path):
    p = tmp_path / "kv.log"
    with KVStore(p) as kv:
        kv.put("k", "v")
        kv.flush()
        size = p.stat().st_size
        kv.put("k", "v")
        kv.flush()
        assert p.stat().st_size == size


def test_torn_tail_is_discarded(tmp_path):
    p = tmp_path / "kv.log"
    with KVStore(p) as kv:
        kv.put("k1", "v1")
        kv.put("k2", "v2")
    data = p.read_bytes()
    p.write_bytes(data[:-1])
    with KVStore(p) as kv:
        assert kv.get("k1") == "v1" and kv.get("k2") is None
        assert kv.recovered_tail > 0
        kv.put("k3", "v3")
    with KVStore(p) as kv:
        assert kv.get("k3") == "v3"


def test_compact(tmp_path):
    p = tmp_path / "kv.log"
    with KVStore(p) as kv:
        for i in range(50):
            kv.put("k", str(i))
        kv.flush()
        before = p.stat().st_size
        kv.compact()
        assert p.stat().st_size < before
        kv.put("j", "1")
    with KVStore(p) as kv:
        assert kv.get("k") == "49" and kv.get("j") == "1"


def test_memory_store():
    kv = KVStore()
    kv.put("x", "1")
    kv.compact()
    assert kv.get("x") == "1" and kv.scan() == [("x", "1")]
