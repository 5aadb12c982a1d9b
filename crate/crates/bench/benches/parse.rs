use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use triplekit::persist::{decode_snapshot, encode_snapshot};
use triplekit::rdfio::{load_rdf, process_rdf};
use triplekit::store::StoredTriple;
use triplekit_bench::{people, people_rdf_xml};

fn rdf_xml(c: &mut Criterion) {
    let mut group = c.benchmark_group("rdf/xml");
    for n in [1_000, 10_000] {
        let doc = people_rdf_xml(n);
        group.throughput(Throughput::Elements(3 * n as u64));
        group.bench_with_input(BenchmarkId::new("load", n), &doc, |b, doc| {
            b.iter(|| load_rdf(black_box(doc.as_bytes()), "bench").unwrap())
        });
        group.bench_with_input(BenchmarkId::new("process", n), &doc, |b, doc| {
            b.iter(|| {
                let mut count = 0;
                process_rdf(black_box(doc.as_bytes()), "bench", |ts, _| {
                    count += ts.len();
                    Ok(())
                })
                .unwrap();
                count
            })
        });
    }
    group.finish();
}

fn snapshot(c: &mut Criterion) {
    let stored: Vec<StoredTriple> =
        people(10_000).into_iter().map(|triple| StoredTriple { triple, source: "bench".into(), line: 0 }).collect();
    let bytes = encode_snapshot("bench", &stored);
    let mut group = c.benchmark_group("snapshot");
    group.throughput(Throughput::Elements(stored.len() as u64));
    group.bench_function("encode 30k", |b| b.iter(|| encode_snapshot("bench", black_box(&stored))));
    group.bench_function("decode 30k", |b| b.iter(|| decode_snapshot(black_box(&bytes)).unwrap()));
    group.finish();
}

criterion_group!(benches, rdf_xml, snapshot);
criterion_main!(benches);
