use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use knnvault::store::{self, segment};
use knnvault_oracle::fixtures::{collection_of, random_records};

fn bench_segment(c: &mut Criterion) {
    let records = random_records(10_000, 128, 10, 11);
    let bytes = segment::encode_records(128, &records);
    let path = std::path::Path::new("bench.embv");
    let mut group = c.benchmark_group("segment");
    group.throughput(Throughput::Bytes(bytes.len() as u64));
    group.bench_function("encode_10k_d128", |b| b.iter(|| segment::encode_records(128, &records)));
    group.bench_function("decode_10k_d128", |b| b.iter(|| segment::decode(&bytes, path).unwrap()));
    group.finish();
}

fn bench_save_load(c: &mut Criterion) {
    let coll = collection_of(&random_records(10_000, 128, 10, 12), 128, 10);
    let dir = tempfile::tempdir().unwrap();
    let mut group = c.benchmark_group("persist");
    group.sample_size(20);
    group.bench_function("save_10k_d128", |b| b.iter(|| store::save(&coll, dir.path()).unwrap()));
    store::save(&coll, dir.path()).unwrap();
    group.bench_function("load_10k_d128", |b| b.iter(|| store::load(dir.path()).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_segment, bench_save_load);
criterion_main!(benches);
