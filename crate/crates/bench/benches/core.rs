use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use medis_bench::corpus;
use medis_core::export::{decode_dossier, export_dossier};
use medis_core::lifecycle::{allowed_actions, is_action_permitted, Lifecycle};
use medis_core::search::Query;
use medis_core::store::{BlobStore, MemoryBlobStore};
use medis_core::time::utc_day;
use medis_core::{fixtures, CivState, EventKind, Role};

fn guard(c: &mut Criterion) {
    c.bench_function("guard/full-table", |b| {
        b.iter(|| {
            let mut n = 0;
            for s in CivState::ALL {
                for r in Role::ALL {
                    for k in EventKind::ALL {
                        n += is_action_permitted(black_box(s), r, k).permitted as usize;
                    }
                    n += allowed_actions(s, r).len();
                }
            }
            n
        })
    });
}

fn lifecycle(c: &mut Criterion) {
    let (medis, _) = corpus(200);
    let logs: Vec<_> = medis
        .repository()
        .all()
        .iter()
        .map(|d| d.lifecycle.audit().iter().map(|r| r.event.clone()).collect::<Vec<_>>())
        .collect();
    let events: usize = logs.iter().map(Vec::len).sum();
    let mut group = c.benchmark_group("lifecycle");
    group.throughput(Throughput::Elements(events as u64));
    group.bench_function("replay-200-dossiers", |b| {
        b.iter(|| logs.iter().filter(|l| Lifecycle::replay(l.as_slice()).unwrap().state().is_terminal()).count())
    });
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    for n in [100, 400] {
        let (medis, sup) = corpus(n);
        let queries = [
            ("all", Query::default()),
            ("fig5", fixtures::fig5_query()),
            ("text", Query::from_query_string("product=stent&title=investigation").unwrap()),
        ];
        for (name, q) in &queries {
            group.bench_with_input(BenchmarkId::new(*name, n), q, |b, q| b.iter(|| medis.search(&sup, q).unwrap().len()));
        }
    }
    group.finish();
}

fn export(c: &mut Criterion) {
    let (medis, _) = corpus(50);
    let all = medis.repository().all();
    let d = all.iter().max_by_key(|d| d.documents.len()).unwrap();
    let xml = export_dossier(d);
    let mut group = c.benchmark_group("export");
    group.throughput(Throughput::Bytes(xml.len() as u64));
    group.bench_function("encode", |b| b.iter(|| export_dossier(black_box(d)).len()));
    group.bench_function("decode", |b| b.iter(|| decode_dossier(black_box(xml.as_bytes())).unwrap()));
    group.finish();
}

fn blobs(c: &mut Criterion) {
    let payload = vec![0x5au8; 64 * 1024];
    let mut group = c.benchmark_group("blobs");
    group.throughput(Throughput::Bytes(payload.len() as u64));
    group.bench_function("put-64k", |b| {
        b.iter_batched(MemoryBlobStore::new, |s| s.put(&payload, utc_day(2009, 1, 1)).unwrap(), BatchSize::SmallInput)
    });
    let store = MemoryBlobStore::new();
    let digest = store.put(&payload, utc_day(2009, 1, 1)).unwrap().digest;
    group.bench_function("get-64k", |b| b.iter(|| store.get(&digest).unwrap().len()));
    group.finish();
}

criterion_group!(benches, guard, lifecycle, search, export, blobs);
criterion_main!(benches);
