fn main() {
    let ctx = ncfb::Ctx::<f32>::default();
    for k in [2usize, 3] {
        match ncfb::repcat::build_registry::<f32>(3, k, &ctx) {
            Ok(r) => println!(
                "k_max={k} ok, levels {:?}",
                r.levels.iter().map(|l| l.len()).collect::<Vec<_>>()
            ),
            Err(e) => println!("k_max={k} error: {e}"),
        }
    }
}
