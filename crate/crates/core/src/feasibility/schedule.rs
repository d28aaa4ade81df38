//! Earliest-start forward simulation under hours-of-service rules.
//!
//! Rests are only taken at stops. Before each leg the driver rests if the leg
//! would push cumulative driving past the drive limit or the on-duty span past
//! the duty limit. Waiting for a window counts as on-duty time; a wait at
//! least as long as the minimum rest is taken as a rest instead. If serving
//! after a wait would breach the duty limit, the driver rests on arrival and
//! serves afterwards.

use crate::model::{Hos, Minutes, Schedule, StopTimes, TimeWindow, Timestamp};

use super::Violation;

/// Simulates a stop sequence with per-stop service-start windows and per-leg drive times.
///
/// `windows.len() == drives.len() + 1`.
pub fn simulate(windows: &[TimeWindow], drives: &[Minutes], hos: Hos, service: Minutes) -> Result<Schedule, Violation> {
    debug_assert_eq!(windows.len(), drives.len() + 1);
    let max_drive = hos.max_drive_hours.0;
    let max_duty = hos.max_duty_hours.0;
    let rest = hos.min_rest_hours.0;
    let service = service.0;

    if service > max_duty {
        return Err(Violation::Hos);
    }

    let start = windows[0].earliest.0;
    let mut stops = Vec::with_capacity(windows.len());
    let mut rests = Vec::new();
    let mut duty_start = start;
    let mut driven = 0i64;
    let mut rested = false;

    stops.push(StopTimes {
        arrival: Timestamp(start),
        service_start: Timestamp(start),
        departure: Timestamp(start + service),
    });
    let mut depart = start + service;

    for (i, drive) in drives.iter().enumerate() {
        let drive = drive.0;
        if drive > max_drive || drive > max_duty {
            return Err(Violation::Hos);
        }
        if driven + drive > max_drive || depart + drive - duty_start > max_duty {
            rests.push((Timestamp(depart), Timestamp(depart + rest)));
            depart += rest;
            duty_start = depart;
            driven = 0;
            rested = true;
            stops[i].departure = Timestamp(depart);
        }
        let arrive = depart + drive;
        driven += drive;

        let window = windows[i + 1];
        if arrive > window.latest.0 {
            return Err(if rested { Violation::Hos } else { Violation::TimeWindows });
        }
        let open = window.earliest.0;
        let service_start = if open - arrive >= rest {
            rests.push((Timestamp(arrive), Timestamp(open)));
            duty_start = open;
            driven = 0;
            rested = true;
            open
        } else if arrive.max(open) + service - duty_start <= max_duty {
            arrive.max(open)
        } else {
            let resume = (arrive + rest).max(open);
            if resume > window.latest.0 {
                return Err(Violation::Hos);
            }
            rests.push((Timestamp(arrive), Timestamp(resume)));
            duty_start = resume;
            driven = 0;
            rested = true;
            resume
        };
        depart = service_start + service;
        stops.push(StopTimes {
            arrival: Timestamp(arrive),
            service_start: Timestamp(service_start),
            departure: Timestamp(depart),
        });
    }

    Ok(Schedule { shift_start: Timestamp(start), stops, rest_periods: rests })
}

/// Independent check of a schedule against windows, drive times and HOS limits.
///
/// Returns a description of the first broken rule.
pub fn check_schedule(
    schedule: &Schedule,
    windows: &[TimeWindow],
    drives: &[Minutes],
    hos: Hos,
    service: Minutes,
) -> Result<(), String> {
    let st = &schedule.stops;
    if st.len() != windows.len() {
        return Err("stop count mismatch".into());
    }
    for (i, s) in st.iter().enumerate() {
        if !windows[i].contains(s.service_start) {
            return Err(format!("stop {i}: service start {} outside window", s.service_start));
        }
        if s.service_start < s.arrival || s.departure < s.service_start.plus(service) {
            return Err(format!("stop {i}: times out of order"));
        }
        if i > 0 {
            if st[i - 1].arrival > s.arrival {
                return Err(format!("stop {i}: arrivals decrease"));
            }
            if s.arrival != st[i - 1].departure.plus(drives[i - 1]) {
                return Err(format!("stop {i}: arrival does not follow the leg"));
            }
        }
    }
    let mut rests = schedule.rest_periods.clone();
    rests.sort();
    for &(a, b) in &rests {
        if b.since(a) < hos.min_rest_hours {
            return Err(format!("rest {a}..{b} shorter than minimum"));
        }
        // rests happen at a stop: inside [arrival, departure] of some stop and outside its service
        let at_stop = st.iter().any(|s| {
            s.arrival <= a && b <= s.departure && (b <= s.service_start || a >= s.service_start.plus(service))
        });
        if !at_stop {
            return Err(format!("rest {a}..{b} not taken at a stop"));
        }
    }

    // Split the shift at rests; each piece obeys the drive and duty limits.
    let end = st.last().map(|s| s.departure).unwrap_or(schedule.shift_start);
    let mut boundaries = vec![schedule.shift_start];
    for &(a, b) in &rests {
        boundaries.push(a);
        boundaries.push(b);
    }
    boundaries.push(end);
    for piece in boundaries.chunks(2) {
        let (from, to) = (piece[0], piece[1]);
        if to.since(from) > hos.max_duty_hours {
            return Err(format!("duty span {from}..{to} exceeds limit"));
        }
        let driven: i64 = (0..drives.len())
            .filter(|&i| st[i].departure >= from && st[i + 1].arrival <= to)
            .map(|i| drives[i].0)
            .sum();
        if driven > hos.max_drive_hours.0 {
            return Err(format!("driving {driven} min in {from}..{to} exceeds limit"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(e: i64, l: i64) -> TimeWindow {
        TimeWindow::new(Timestamp(e), Timestamp(l))
    }

    fn h(x: i64) -> i64 {
        x * 60
    }

    #[test]
    fn single_short_leg_needs_no_rest() {
        let s = simulate(&[w(0, 0), w(0, h(48))], &[Minutes(h(5))], Hos::default(), Minutes(0)).unwrap();
        assert!(s.rest_periods.is_empty());
        assert_eq!(s.stops[1].arrival, Timestamp(h(5)));
    }

    #[test]
    fn twelve_drive_hours_take_one_rest_before_second_leg() {
        // 6h, then the 12h horizon check trips the 11h limit: rest 10h at stop 1, resume.
        let windows = [w(0, 0), w(0, h(48)), w(0, h(48))];
        let drives = [Minutes(h(6)), Minutes(h(6))];
        let s = simulate(&windows, &drives, Hos::default(), Minutes(0)).unwrap();
        assert_eq!(s.rest_periods, vec![(Timestamp(h(6)), Timestamp(h(16)))]);
        assert_eq!(s.stops[1].departure, Timestamp(h(16)));
        assert_eq!(s.stops[2].arrival, Timestamp(h(22)));
        check_schedule(&s, &windows, &drives, Hos::default(), Minutes(0)).unwrap();
    }

    #[test]
    fn no_slack_for_rest_is_an_hos_violation() {
        let windows = [w(0, 0), w(0, h(48)), w(0, h(12))];
        let drives = [Minutes(h(6)), Minutes(h(6))];
        assert_eq!(simulate(&windows, &drives, Hos::default(), Minutes(0)), Err(Violation::Hos));
    }

    #[test]
    fn late_without_rest_is_a_window_violation() {
        let windows = [w(0, 0), w(0, h(4))];
        assert_eq!(simulate(&windows, &[Minutes(h(5))], Hos::default(), Minutes(0)), Err(Violation::TimeWindows));
    }

    #[test]
    fn early_arrival_waits_on_duty() {
        // arrive at 3h, window opens at 5h, service 30 min
        let windows = [w(0, 0), w(h(5), h(20))];
        let s = simulate(&windows, &[Minutes(h(3))], Hos::default(), Minutes(30)).unwrap();
        assert_eq!(s.stops[1].arrival, Timestamp(h(3) + 30));
        assert_eq!(s.stops[1].service_start, Timestamp(h(5)));
        assert_eq!(s.stops[1].departure, Timestamp(h(5) + 30));
        assert!(s.rest_periods.is_empty());
        // duty span from shift start covers the wait: 5.5h
        assert_eq!(s.stops[1].departure.since(s.shift_start), Minutes(h(5) + 30));
    }

    #[test]
    fn long_wait_becomes_a_rest() {
        let windows = [w(0, 0), w(h(20), h(30))];
        let s = simulate(&windows, &[Minutes(h(2))], Hos::default(), Minutes(0)).unwrap();
        assert_eq!(s.rest_periods, vec![(Timestamp(h(2)), Timestamp(h(20)))]);
    }

    #[test]
    fn wait_that_breaks_duty_falls_back_to_rest_then_serve() {
        // 10h driving, arrive 10h, window opens 19h: waiting 9h breaks the 14h span
        let windows = [w(0, 0), w(h(19), h(40))];
        let s = simulate(&windows, &[Minutes(h(10))], Hos::default(), Minutes(0)).unwrap();
        assert_eq!(s.rest_periods, vec![(Timestamp(h(10)), Timestamp(h(20)))]);
        assert_eq!(s.stops[1].service_start, Timestamp(h(20)));
    }

    #[test]
    fn leg_longer_than_drive_limit_is_infeasible() {
        let windows = [w(0, 0), w(0, h(100))];
        assert_eq!(simulate(&windows, &[Minutes(h(12))], Hos::default(), Minutes(0)), Err(Violation::Hos));
    }
}
