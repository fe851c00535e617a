use super::LogitFit;

/// `*`, `**` or `***` at the 0.1, 0.05 and 0.01 levels.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Regression table with one column per fit: coefficients with stars, standard
/// errors in parentheses, then observations, log likelihood and AIC.
pub fn render_logit_table(title: &str, columns: &[(String, &LogitFit)]) -> String {
    let mut names: Vec<String> = Vec::new();
    for (_, fit) in columns {
        for n in &fit.names {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for name in &names {
        let mut coef = Vec::new();
        let mut se = Vec::new();
        for (_, fit) in columns {
            match fit.names.iter().position(|n| n == name) {
                Some(k) => {
                    let p = fit.p_values()[k];
                    coef.push(format!("{:.3}{}", fit.coefficients[k], significance_stars(p)));
                    se.push(format!("({:.3})", fit.std_errors[k]));
                }
                None => {
                    coef.push(String::new());
                    se.push(String::new());
                }
            }
        }
        rows.push((name.clone(), coef));
        rows.push((String::new(), se));
    }
    let footer: Vec<(String, Vec<String>)> = vec![
        ("Observations".into(), columns.iter().map(|(_, f)| f.n_obs.to_string()).collect()),
        ("Log Likelihood".into(), columns.iter().map(|(_, f)| format!("{:.3}", f.log_likelihood)).collect()),
        ("Akaike Inf. Crit.".into(), columns.iter().map(|(_, f)| format!("{:.3}", f.aic())).collect()),
    ];
    let heads: Vec<String> = columns.iter().map(|(h, _)| h.clone()).collect();
    let label_w = rows.iter().chain(&footer).map(|(l, _)| l.len()).max().unwrap_or(0).max(8);
    let col_w: Vec<usize> = (0..columns.len())
        .map(|j| {
            rows.iter()
                .chain(&footer)
                .map(|(_, v)| v[j].len())
                .chain(std::iter::once(heads[j].len()))
                .max()
                .unwrap_or(0)
                + 2
        })
        .collect();
    let total = label_w + col_w.iter().sum::<usize>();
    let rule = "=".repeat(total);
    let thin = "-".repeat(total);
    let line = |label: &str, cells: &[String]| {
        let mut s = format!("{label:<label_w$}");
        for (c, w) in cells.iter().zip(&col_w) {
            s.push_str(&format!("{c:>w$}"));
        }
        s.trim_end().to_string()
    };
    let mut out = vec![title.to_string(), rule.clone(), line("", &heads), thin.clone()];
    out.extend(rows.iter().map(|(l, c)| line(l, c)));
    out.push(thin);
    out.extend(footer.iter().map(|(l, c)| line(l, c)));
    out.push(rule);
    out.push("Note: *p<0.1; **p<0.05; ***p<0.01".into());
    out.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_thresholds() {
        assert_eq!(significance_stars(0.005), "***");
        assert_eq!(significance_stars(0.03), "**");
        assert_eq!(significance_stars(0.07), "*");
        assert_eq!(significance_stars(0.5), "");
    }

    #[test]
    fn table_layout() {
        let fit = LogitFit {
            names: vec!["(Intercept)".into(), "cohab".into()],
            coefficients: vec![1.5, -0.2],
            std_errors: vec![0.1, 0.3],
            log_likelihood: -100.0,
            n_obs: 250,
            converged: true,
            n_iter: 5,
            max_score: 0.0,
        };
        let t = render_logit_table("Section response", &[("C1".into(), &fit), ("C2".into(), &fit)]);
        assert!(t.contains("1.500***"));
        assert!(t.contains("(0.300)"));
        assert!(t.contains("Akaike Inf. Crit."));
        assert!(t.contains("204.000"));
    }
}
