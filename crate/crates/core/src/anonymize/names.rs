// Common given names used by the dictionary half of the name detector.
pub(super) const GIVEN_NAMES: &[&str] = &[
    "Aaron", "Abigail", "Adam", "Ahmed", "Aisha", "Alan", "Albert", "Alex", "Alexander", "Alice",
    "Alicia", "Amanda", "Amelia", "Amy", "Ana", "Andrea", "Andrew", "Angela", "Ann", "Anna",
    "Anne", "Anthony", "Antonio", "Arthur", "Ashley", "Barbara", "Benjamin", "Betty", "Beverly",
    "Brandon", "Brenda", "Brian", "Bruce", "Carl", "Carlos", "Carol", "Carolyn", "Catherine",
    "Charles", "Charlotte", "Cheryl", "Chloe", "Christina", "Christine", "Christopher", "Cynthia",
    "Daniel", "David", "Deborah", "Debra", "Dennis", "Diana", "Diane", "Donald", "Donna", "Doris",
    "Dorothy", "Douglas", "Dylan", "Edward", "Elena", "Elizabeth", "Ella", "Emily", "Emma", "Eric",
    "Ethan", "Evelyn", "Fatima", "Frances", "Frank", "Gabriel", "Gary", "George", "Gloria",
    "Grace", "Gregory", "Hannah", "Harold", "Harry", "Heather", "Helen", "Henry", "Isabella",
    "Jack", "Jacob", "James", "Janet", "Janice", "Jason", "Jean", "Jeffrey", "Jennifer", "Jerry",
    "Jessica", "Joan", "John", "Jonathan", "Jose", "Joseph", "Joshua", "Joyce", "Juan", "Judith",
    "Judy", "Julia", "Julie", "Justin", "Karen", "Katherine", "Kathleen", "Kelly", "Kenneth",
    "Kevin", "Kimberly", "Larry", "Laura", "Lauren", "Linda", "Lisa", "Liam", "Lucas", "Luis",
    "Margaret", "Maria", "Marie", "Marilyn", "Mark", "Martha", "Mary", "Matthew", "Megan",
    "Melissa", "Michael", "Michelle", "Mohammed", "Nancy", "Natalie", "Nicholas", "Nicole",
    "Noah", "Olivia", "Pamela", "Patricia", "Patrick", "Paul", "Peter", "Priya", "Rachel",
    "Ralph", "Raymond", "Rebecca", "Richard", "Robert", "Roger", "Ronald", "Rose", "Russell",
    "Ruth", "Ryan", "Samantha", "Samuel", "Sandra", "Sara", "Sarah", "Scott", "Sean", "Sharon",
    "Shirley", "Sophia", "Stephanie", "Stephen", "Steven", "Susan", "Teresa", "Terry", "Thomas",
    "Timothy", "Tyler", "Victoria", "Virginia", "Walter", "Wayne", "William", "Willie", "Zachary",
];
