use resq_core::models::*;
fn main() {
    for (i, p) in reference_loss_params().iter().enumerate() {
        println!("res {}", i + 1);
        for &t in &[
            0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0,
        ] {
            let lb = loss_breakdown(p, 1.0, t).unwrap();
            println!(
                "  T={t:5} Qint={:.3e} tls={:.2e} qp={:.2e} other={:.2e}",
                lb.q_int(),
                lb.tls,
                lb.qp,
                lb.other
            );
        }
    }
    for (i, p) in reference_shift_params().iter().enumerate() {
        println!("shift {}", i + 1);
        for &t in &[0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5] {
            println!(
                "  T={t:5} tls={:.3e} qp={:.3e}",
                freq_shift_tls(p, t).unwrap(),
                freq_shift_qp(p, t).unwrap()
            );
        }
    }
}
